#pragma once

#include <cstddef>
#include <ostream>
#include <vector>

#include "miscon/embedding.hpp"
#include "miscon/label.hpp"

namespace miscon {

/// Tier weights for the soft similarity mask, most specific tier first.
/// Must satisfy 1 >= same_label >= same_category >= same_reasoning >= 0.
struct MaskWeights {
    double same_label = 1.0;       // identical composite label
    double same_category = 0.5;    // same correctness and reasoning type
    double same_reasoning = 0.25;  // same reasoning type only

    void validate() const;
};

/// Symmetric N x N relational-strength matrix with a zero diagonal.
class SoftMask {
public:
    /// Tiered construction: for i != j the entry is the weight of the most
    /// specific tier the two labels share, 0 when they share none.
    static SoftMask build(const std::vector<CompositeLabel>& labels,
                          const MaskWeights& weights = {});

    /// Wraps an explicit matrix. Must be square with a zero diagonal and
    /// exactly symmetric. Negative entries are accepted: the loss normalizes
    /// by sum of absolute values, so they are well-defined even though the
    /// default scheme never produces them.
    static SoftMask from_matrix(const std::vector<std::vector<double>>& entries);

    std::size_t size() const noexcept { return size_; }
    double at(std::size_t i, std::size_t j) const { return entries_[i * size_ + j]; }

    /// All entries multiplied by c > 0. The loss is invariant under this.
    SoftMask scaled(double c) const;

private:
    SoftMask(std::size_t size, std::vector<double> entries)
        : size_(size), entries_(std::move(entries)) {}

    std::size_t size_;
    std::vector<double> entries_;
};

/// Inputs to one loss evaluation. Embeddings are free parameters living on
/// the unit sphere; the loss treats them as plain vectors.
struct ContrastiveBatch {
    std::vector<EmbeddingVector> embeddings;
    std::vector<CompositeLabel> labels;
    double temperature = 0.1;
};

/// Masked supervised contrastive loss:
///   sum_i [ -1/S_i * sum_j M_ij * log( exp(z_i.z_j/t) / sum_{a!=i} exp(z_i.z_a/t) ) ]
/// with S_i = sum_j |M_ij|. Rows with S_i = 0 contribute nothing (an anchor
/// without relations has no normalizable term). Log-sum-exp uses
/// max-subtraction so small temperatures cannot overflow.
double mask_supcon_loss(const ContrastiveBatch& batch, const SoftMask& mask);

/// Analytic d(loss)/d(z_k) for every k, N x d. The derivative treats each
/// z_k as a free parameter; projection back to the unit sphere is the
/// trainer's job, not the gradient's, so this matches finite differences of
/// mask_supcon_loss exactly.
std::vector<std::vector<double>> mask_supcon_gradient(const ContrastiveBatch& batch,
                                                      const SoftMask& mask);

struct ToyTrainConfig {
    std::size_t epochs = 200;
    double step_size = 0.5;
    double temperature = 0.1;
    MaskWeights weights;
};

struct ToyTrainResult {
    std::vector<EmbeddingVector> embeddings;
    /// Loss before the step of each epoch, one value per epoch.
    std::vector<double> loss_curve;
};

/// Desk-scale projected gradient descent on the embeddings themselves:
/// descend the analytic gradient, then re-normalize every row to the unit
/// sphere. Initial embeddings are projected the same way before the first
/// evaluation. Throws InputError naming the epoch if the loss diverges.
ToyTrainResult toy_train(const std::vector<EmbeddingVector>& initial,
                         const std::vector<CompositeLabel>& labels, const ToyTrainConfig& config);

/// CSV (epoch, loss) with full round-trip precision, for plotting.
void write_loss_curve(std::ostream& out, const std::vector<double>& curve);

}  // namespace miscon
