#include "miscon/contrastive.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <string>

#include "miscon/errors.hpp"

namespace miscon {

void MaskWeights::validate() const {
    const bool finite = std::isfinite(same_label) && std::isfinite(same_category) &&
                        std::isfinite(same_reasoning);
    if (!finite || !(1.0 >= same_label && same_label >= same_category &&
                     same_category >= same_reasoning && same_reasoning >= 0.0)) {
        throw InputError(
            "mask weights must satisfy 1 >= same_label >= same_category >= same_reasoning >= 0");
    }
}

SoftMask SoftMask::build(const std::vector<CompositeLabel>& labels, const MaskWeights& weights) {
    weights.validate();
    const std::size_t n = labels.size();
    if (n < 2) throw InputError("a soft mask needs at least 2 labels");
    std::vector<double> entries(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double w = 0.0;
            if (labels[i] == labels[j]) {
                w = weights.same_label;
            } else if (labels[i].correctness() == labels[j].correctness() &&
                       labels[i].reasoning_type() == labels[j].reasoning_type()) {
                w = weights.same_category;
            } else if (labels[i].reasoning_type() == labels[j].reasoning_type()) {
                w = weights.same_reasoning;
            }
            entries[i * n + j] = w;
            entries[j * n + i] = w;
        }
    }
    return SoftMask(n, std::move(entries));
}

SoftMask SoftMask::from_matrix(const std::vector<std::vector<double>>& matrix) {
    const std::size_t n = matrix.size();
    if (n < 2) throw InputError("a soft mask needs at least 2 rows");
    std::vector<double> entries(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (matrix[i].size() != n) {
            throw InputError("mask row " + std::to_string(i) + " has " +
                             std::to_string(matrix[i].size()) + " entries, expected " +
                             std::to_string(n));
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (!std::isfinite(matrix[i][j])) {
                throw InputError("mask entry (" + std::to_string(i) + ", " + std::to_string(j) +
                                 ") is not finite");
            }
            entries[i * n + j] = matrix[i][j];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (entries[i * n + i] != 0.0) {
            throw InputError("mask diagonal entry " + std::to_string(i) + " must be 0");
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            if (entries[i * n + j] != entries[j * n + i]) {
                throw InputError("mask is not symmetric at (" + std::to_string(i) + ", " +
                                 std::to_string(j) + ")");
            }
        }
    }
    return SoftMask(n, std::move(entries));
}

SoftMask SoftMask::scaled(double c) const {
    if (!(c > 0.0) || !std::isfinite(c)) throw InputError("mask scale must be a positive number");
    std::vector<double> entries = entries_;
    for (double& e : entries) e *= c;
    return SoftMask(size_, std::move(entries));
}

namespace {

void validate_batch(const ContrastiveBatch& batch, const SoftMask& mask) {
    const std::size_t n = batch.embeddings.size();
    if (n < 2) throw InputError("a contrastive batch needs at least 2 embeddings");
    if (batch.labels.size() != n) {
        throw InputError("batch has " + std::to_string(n) + " embeddings but " +
                         std::to_string(batch.labels.size()) + " labels");
    }
    if (!(batch.temperature > 0.0) || !std::isfinite(batch.temperature)) {
        throw InputError("temperature must be a positive number");
    }
    const std::size_t d = batch.embeddings.front().dimension();
    for (std::size_t i = 0; i < n; ++i) {
        if (batch.embeddings[i].dimension() != d) {
            throw InputError("batch embedding " + std::to_string(i) + " has dimension " +
                             std::to_string(batch.embeddings[i].dimension()) + ", expected " +
                             std::to_string(d));
        }
    }
    if (mask.size() != n) {
        throw InputError("mask size " + std::to_string(mask.size()) +
                         " does not match batch size " + std::to_string(n));
    }
}

/// Similarity matrix u_ij = z_i.z_j / t plus the per-row pieces both the loss
/// and the gradient need: S_i = sum_j |M_ij|, T_i = sum_j M_ij, and the
/// log-sum-exp over j != i.
struct BatchTerms {
    std::size_t n = 0;
    std::vector<double> u;        // n*n, diagonal unused
    std::vector<double> lse;      // per row, over j != i
    std::vector<double> support;  // S_i
    std::vector<double> signed_sum;  // T_i
};

BatchTerms compute_terms(const ContrastiveBatch& batch, const SoftMask& mask) {
    BatchTerms terms;
    const std::size_t n = batch.embeddings.size();
    terms.n = n;
    terms.u.assign(n * n, 0.0);
    terms.lse.assign(n, 0.0);
    terms.support.assign(n, 0.0);
    terms.signed_sum.assign(n, 0.0);

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            terms.u[i * n + j] =
                dot(batch.embeddings[i], batch.embeddings[j]) / batch.temperature;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < n; ++a) {
            if (a != i) top = std::max(top, terms.u[i * n + a]);
        }
        double sum = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
            if (a != i) sum += std::exp(terms.u[i * n + a] - top);
        }
        terms.lse[i] = top + std::log(sum);
        for (std::size_t j = 0; j < n; ++j) {
            terms.support[i] += std::fabs(mask.at(i, j));
            terms.signed_sum[i] += mask.at(i, j);
        }
    }
    return terms;
}

}  // namespace

double mask_supcon_loss(const ContrastiveBatch& batch, const SoftMask& mask) {
    validate_batch(batch, mask);
    const BatchTerms terms = compute_terms(batch, mask);
    const std::size_t n = terms.n;

    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (terms.support[i] == 0.0) continue;
        double weighted = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double m = mask.at(i, j);
            if (m == 0.0) continue;
            weighted += m * (terms.u[i * n + j] - terms.lse[i]);
        }
        loss += -weighted / terms.support[i];
    }
    if (!std::isfinite(loss)) throw InputError("contrastive loss is not finite");
    return loss;
}

std::vector<std::vector<double>> mask_supcon_gradient(const ContrastiveBatch& batch,
                                                      const SoftMask& mask) {
    validate_batch(batch, mask);
    const BatchTerms terms = compute_terms(batch, mask);
    const std::size_t n = terms.n;
    const std::size_t d = batch.embeddings.front().dimension();

    // dL/du_ij for j != i: row i contributes -(M_ij - T_i * p_ij) / S_i,
    // where p_ij = exp(u_ij - lse_i) is the softmax over row i.
    std::vector<double> g(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (terms.support[i] == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double p = std::exp(terms.u[i * n + j] - terms.lse[i]);
            g[i * n + j] = (terms.signed_sum[i] * p - mask.at(i, j)) / terms.support[i];
        }
    }

    // u_ij depends on z_k through both its row and its column:
    // dL/dz_k = 1/t * sum_{j != k} (g_kj + g_jk) * z_j.
    std::vector<std::vector<double>> grad(n, std::vector<double>(d, 0.0));
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j == k) continue;
            const double weight = (g[k * n + j] + g[j * n + k]) / batch.temperature;
            if (weight == 0.0) continue;
            const auto& zj = batch.embeddings[j].values();
            for (std::size_t c = 0; c < d; ++c) grad[k][c] += weight * zj[c];
        }
    }
    for (const auto& row : grad) {
        for (double v : row) {
            if (!std::isfinite(v)) throw InputError("contrastive gradient is not finite");
        }
    }
    return grad;
}

ToyTrainResult toy_train(const std::vector<EmbeddingVector>& initial,
                         const std::vector<CompositeLabel>& labels,
                         const ToyTrainConfig& config) {
    if (initial.size() < 2) throw InputError("toy_train needs at least 2 embeddings");
    if (initial.size() != labels.size()) {
        throw InputError("toy_train got " + std::to_string(initial.size()) + " embeddings but " +
                         std::to_string(labels.size()) + " labels");
    }
    if (!(config.step_size >= 0.0) || !std::isfinite(config.step_size)) {
        throw InputError("step_size must be a nonnegative number");
    }

    ContrastiveBatch batch;
    batch.embeddings = initial;
    batch.labels = labels;
    batch.temperature = config.temperature;
    for (std::size_t i = 0; i < batch.embeddings.size(); ++i) {
        try {
            batch.embeddings[i].normalize();
        } catch (const InputError& e) {
            throw InputError("initial embedding " + std::to_string(i) + ": " + e.what());
        }
    }
    const SoftMask mask = SoftMask::build(labels, config.weights);

    ToyTrainResult result;
    result.loss_curve.reserve(config.epochs);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        double loss = 0.0;
        try {
            loss = mask_supcon_loss(batch, mask);
        } catch (const InputError& e) {
            throw InputError("training diverged at epoch " + std::to_string(epoch) + ": " +
                             e.what());
        }
        result.loss_curve.push_back(loss);

        const auto grad = mask_supcon_gradient(batch, mask);
        for (std::size_t i = 0; i < batch.embeddings.size(); ++i) {
            std::vector<double> values = batch.embeddings[i].values();
            for (std::size_t c = 0; c < values.size(); ++c) {
                values[c] -= config.step_size * grad[i][c];
            }
            EmbeddingVector updated(std::move(values));
            try {
                updated.normalize();
            } catch (const InputError& e) {
                throw InputError("training diverged at epoch " + std::to_string(epoch) +
                                 " on embedding " + std::to_string(i) + ": " + e.what());
            }
            batch.embeddings[i] = std::move(updated);
        }
    }

    result.embeddings = std::move(batch.embeddings);
    return result;
}

void write_loss_curve(std::ostream& out, const std::vector<double>& curve) {
    out << "epoch,loss\n";
    char buffer[64];
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const auto result = std::to_chars(buffer, buffer + sizeof(buffer), curve[i]);
        out << i << ',' << std::string_view(buffer, result.ptr) << '\n';
    }
}

}  // namespace miscon
