#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "miscon/errors.hpp"
#include "miscon/fusion.hpp"
#include "miscon/rng.hpp"
#include "support.hpp"

using namespace miscon;
namespace mt = miscon::test;
using json = nlohmann::json;

namespace {

ScoredRanking ranking_of(const std::vector<std::pair<std::string, double>>& scored) {
    std::vector<ScoredItem> items;
    for (const auto& [canonical, score] : scored) items.push_back({mt::label_of(canonical), score});
    return ScoredRanking::by_score(std::move(items));
}

std::vector<std::string> order_of(const ScoredRanking& ranking) {
    std::vector<std::string> out;
    for (const auto& item : ranking.items()) out.push_back(item.label.canonical());
    return out;
}

/// A ranking over `size` labels with the truth at 1-based `rank`, or absent
/// when rank is 0. Filler labels are canonically ordered appendix entries.
ScoredRanking with_truth_at(std::size_t rank, std::size_t size, const CompositeLabel& truth) {
    std::vector<ScoredItem> items;
    double score = static_cast<double>(size + 1);
    std::size_t filler = 0;
    for (std::size_t position = 1; position <= size; ++position) {
        if (position == rank) {
            items.push_back({truth, score});
        } else {
            items.push_back({mt::label_of("False_Misconception:Filler_" +
                                          std::string(1, static_cast<char>('a' + filler++))),
                             score});
        }
        score -= 1.0;
    }
    return ScoredRanking(std::move(items));
}

}  // namespace

TEST_CASE("softmax handles symmetry, singletons, and the frozen example") {
    const auto uniform = softmax_normalize({0.0, 0.0, 0.0});
    REQUIRE(uniform.size() == 3);
    for (double p : uniform) CHECK(p == 1.0 / 3.0);

    const auto single = softmax_normalize({42.0});
    REQUIRE(single.size() == 1);
    CHECK(single[0] == 1.0);

    const auto frozen = softmax_normalize({0.1, 0.9});
    CHECK(frozen[0] == doctest::Approx(0.31002551887238755).epsilon(1e-12));
    CHECK(frozen[1] == doctest::Approx(0.6899744811276125).epsilon(1e-12));
}

TEST_CASE("softmax outputs are positive, sum to one, and survive huge scores") {
    SplitMix64 rng(31);
    for (int round = 0; round < 50; ++round) {
        std::vector<double> scores;
        const std::size_t n = 1 + rng.next_below(8);
        for (std::size_t i = 0; i < n; ++i) scores.push_back(20.0 * rng.next_unit() - 10.0);
        const auto p = softmax_normalize(scores);
        double sum = 0.0;
        for (double v : p) {
            CHECK(v > 0.0);
            sum += v;
        }
        CHECK(std::fabs(sum - 1.0) < 1e-9);
    }

    // Max-subtraction keeps an overflow-prone input finite and equal to the
    // shifted version of itself.
    const auto large = softmax_normalize({1000.0, 1001.0});
    const auto small = softmax_normalize({0.0, 1.0});
    CHECK(large[0] == doctest::Approx(small[0]).epsilon(1e-15));
    CHECK(large[1] == doctest::Approx(small[1]).epsilon(1e-15));

    CHECK_THROWS_WITH_AS(softmax_normalize({}), doctest::Contains("at least one"), InputError);
    CHECK_THROWS_WITH_AS(softmax_normalize({0.0, std::nan("")}),
                         doctest::Contains("not finite"), InputError);
}

TEST_CASE("fusion weights are validated") {
    CHECK_NOTHROW((FusionConfig{0.7, 0.3}.validate()));
    CHECK_NOTHROW((FusionConfig{1.0, 0.0}.validate()));
    CHECK_THROWS_AS((FusionConfig{0.0, 0.0}.validate()), InputError);
    CHECK_THROWS_AS((FusionConfig{-0.1, 0.5}.validate()), InputError);
    CHECK_THROWS_AS((FusionConfig{std::nan(""), 0.5}.validate()), InputError);
}

TEST_CASE("fuse matches the frozen two-label example") {
    // Canonical order: False_Misconception:Adding_error < True_Correct:NA.
    const auto rerank = ranking_of(
        {{"False_Misconception:Adding_error", 2.0}, {"True_Correct:NA", 0.0}});
    const auto retrieve = ranking_of(
        {{"False_Misconception:Adding_error", 0.1}, {"True_Correct:NA", 0.9}});
    const auto fused = fuse(rerank, retrieve, {0.7, 0.3});
    REQUIRE(fused.size() == 2);
    CHECK(fused.items()[0].label.canonical() == "False_Misconception:Adding_error");
    CHECK(fused.items()[0].score == doctest::Approx(0.7095656102462338).epsilon(1e-12));
    CHECK(fused.items()[1].score == doctest::Approx(0.290434389753766).epsilon(1e-12));
}

TEST_CASE("fusion can beat both modules") {
    // The truth sits second in both module rankings, behind a different
    // competitor each time; the fused scores put it first.
    const char* truth = "False_Misconception:Adding_error";
    const char* rerank_favorite = "False_Neither:NA";
    const char* retrieve_favorite = "True_Correct:NA";
    const auto rerank = ranking_of(
        {{truth, 2.0}, {rerank_favorite, 2.3}, {retrieve_favorite, -1.0}});
    const auto retrieve = ranking_of(
        {{truth, 1.0}, {rerank_favorite, -2.0}, {retrieve_favorite, 1.3}});
    CHECK(order_of(rerank)[0] == rerank_favorite);
    CHECK(order_of(rerank)[1] == truth);
    CHECK(order_of(retrieve)[0] == retrieve_favorite);
    CHECK(order_of(retrieve)[1] == truth);

    const auto fused = fuse(rerank, retrieve, {0.7, 0.3});
    CHECK(order_of(fused) ==
          std::vector<std::string>{truth, rerank_favorite, retrieve_favorite});
    CHECK(fused.items()[0].score == doctest::Approx(0.41672815561032067).epsilon(1e-12));
    CHECK(fused.items()[1].score == doctest::Approx(0.3999912218031016).epsilon(1e-12));
    CHECK(fused.items()[2].score == doctest::Approx(0.18328062258657776).epsilon(1e-12));
}

TEST_CASE("degenerate weights reduce fusion to one module's ordering") {
    const auto rerank = ranking_of({{"False_Misconception:Adding_error", 1.5},
                                    {"False_Neither:NA", -0.5},
                                    {"True_Correct:NA", 3.0}});
    const auto retrieve = ranking_of({{"False_Misconception:Adding_error", 0.9},
                                      {"False_Neither:NA", 0.95},
                                      {"True_Correct:NA", 0.1}});
    CHECK(order_of(fuse(rerank, retrieve, {1.0, 0.0})) == order_of(rerank));
    CHECK(order_of(fuse(rerank, retrieve, {0.0, 1.0})) == order_of(retrieve));
    CHECK(order_of(fuse(rerank, rerank, {0.5, 0.5})) == order_of(rerank));
}

TEST_CASE("rescaling both fusion weights preserves the ordering exactly") {
    SplitMix64 rng(77);
    const std::vector<std::string> labels = {
        "False_Misconception:Adding_error", "False_Misconception:Denominator-only_change",
        "False_Neither:NA", "True_Correct:NA", "True_Neither:NA"};
    for (int round = 0; round < 100; ++round) {
        std::vector<std::pair<std::string, double>> rerank_scores;
        std::vector<std::pair<std::string, double>> retrieve_scores;
        for (const auto& label : labels) {
            rerank_scores.emplace_back(label, 8.0 * rng.next_unit() - 4.0);
            retrieve_scores.emplace_back(label, 2.0 * rng.next_unit() - 1.0);
        }
        const auto rerank = ranking_of(rerank_scores);
        const auto retrieve = ranking_of(retrieve_scores);
        const double c = 0.25 + 4.0 * rng.next_unit();
        const auto base = fuse(rerank, retrieve, {0.7, 0.3});
        const auto scaled = fuse(rerank, retrieve, {0.7 * c, 0.3 * c});
        CHECK(order_of(base) == order_of(scaled));
        for (std::size_t i = 0; i < base.size(); ++i) {
            CHECK(scaled.items()[i].score ==
                  doctest::Approx(c * base.items()[i].score).epsilon(1e-12));
        }
    }
}

TEST_CASE("fuse rejects mismatched label sets") {
    const auto rerank = ranking_of(
        {{"False_Misconception:Adding_error", 1.0}, {"True_Correct:NA", 0.0}});
    const auto bigger = ranking_of({{"False_Misconception:Adding_error", 1.0},
                                    {"True_Correct:NA", 0.0},
                                    {"False_Neither:NA", 0.5}});
    CHECK_THROWS_WITH_AS(fuse(rerank, bigger, {0.7, 0.3}),
                         doctest::Contains("2 rerank labels but 3 retrieval labels"), InputError);

    const auto disjoint = ranking_of(
        {{"False_Misconception:Adding_error", 1.0}, {"False_Neither:NA", 0.0}});
    CHECK_THROWS_WITH_AS(fuse(rerank, disjoint, {0.7, 0.3}),
                         doctest::Contains("'False_Neither:NA' is in the retrieval ranking"),
                         InputError);
    CHECK_THROWS_WITH_AS(fuse(ScoredRanking{}, ScoredRanking{}, {0.7, 0.3}),
                         doctest::Contains("non-empty"), InputError);
}

TEST_CASE("per-instance MAP applies the 1/j rule with a cutoff") {
    const auto truth = mt::label_of("True_Correct:NA");
    CHECK(map_at_m(with_truth_at(1, 6, truth), truth, 3) == 1.0);
    CHECK(map_at_m(with_truth_at(2, 6, truth), truth, 3) == 0.5);
    CHECK(map_at_m(with_truth_at(3, 6, truth), truth, 3) == doctest::Approx(1.0 / 3.0));
    CHECK(map_at_m(with_truth_at(4, 6, truth), truth, 3) == 0.0);
    CHECK(map_at_m(with_truth_at(4, 6, truth), truth, 5) == 0.25);
    CHECK(map_at_m(with_truth_at(0, 6, truth), truth, 5) == 0.0);  // absent
    CHECK(map_at_m(with_truth_at(1, 1, truth), truth, 1) == 1.0);
    CHECK_THROWS_WITH_AS(map_at_m(with_truth_at(1, 6, truth), truth, 0),
                         doctest::Contains("at least 1"), InputError);
}

TEST_CASE("per-instance MAP is nondecreasing in m") {
    const auto truth = mt::label_of("True_Correct:NA");
    for (std::size_t rank = 0; rank <= 6; ++rank) {
        const auto ranking = with_truth_at(rank, 6, truth);
        double previous = 0.0;
        for (std::size_t m = 1; m <= 6; ++m) {
            const double value = map_at_m(ranking, truth, m);
            CHECK(value >= previous);
            previous = value;
        }
    }
}

namespace {

/// The 10-instance hand table: per stage, the 1-based rank of the truth in
/// a 6-label ranking (0 = absent from the ranking).
struct HandRow {
    const char* id;
    std::size_t retrieval;
    std::size_t reranking;
    std::size_t fused;
};

constexpr HandRow kHandTable[] = {
    {"i01", 1, 2, 1}, {"i02", 2, 1, 1}, {"i03", 3, 2, 2}, {"i04", 4, 3, 3},
    {"i05", 5, 6, 4}, {"i06", 0, 1, 1}, {"i07", 2, 2, 1}, {"i08", 6, 5, 5},
    {"i09", 1, 4, 2}, {"i10", 3, 3, 1},
};

std::pair<std::vector<StagePredictions>, std::vector<TruthRow>> hand_fixture() {
    const auto truth = mt::label_of("True_Correct:NA");
    std::vector<StagePredictions> predictions;
    std::vector<TruthRow> truths;
    for (const auto& row : kHandTable) {
        StagePredictions p;
        p.instance_id = row.id;
        p.retrieval = with_truth_at(row.retrieval, 6, truth);
        p.reranking = with_truth_at(row.reranking, 6, truth);
        p.fused = with_truth_at(row.fused, 6, truth);
        predictions.push_back(std::move(p));
        truths.push_back({row.id, truth});
    }
    return {std::move(predictions), std::move(truths)};
}

}  // namespace

TEST_CASE("aggregate MAP over the hand table matches the precomputed values") {
    const auto [predictions, truths] = hand_fixture();
    const auto report = evaluate(predictions, truths, {1, 3, 5});
    CHECK(report.instance_count == 10);
    REQUIRE(report.rows.size() == 3);
    CHECK(report.m_values == std::vector<std::size_t>{1, 3, 5});

    CHECK(report.rows[0].stage == "retrieval");
    CHECK(report.rows[0].map_at[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(report.rows[0].map_at[1] == doctest::Approx(0.36666666666666664).epsilon(1e-12));
    CHECK(report.rows[0].map_at[2] == doctest::Approx(0.4116666666666666).epsilon(1e-12));

    CHECK(report.rows[1].stage == "reranking");
    CHECK(report.rows[1].map_at[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(report.rows[1].map_at[1] == doctest::Approx(0.4166666666666667).epsilon(1e-12));
    CHECK(report.rows[1].map_at[2] == doctest::Approx(0.4616666666666666).epsilon(1e-12));

    CHECK(report.rows[2].stage == "fused");
    CHECK(report.rows[2].map_at[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(report.rows[2].map_at[1] == doctest::Approx(0.6333333333333334).epsilon(1e-12));
    CHECK(report.rows[2].map_at[2] == doctest::Approx(0.6783333333333335).epsilon(1e-12));

    // Aggregates stay in [0, 1] and are nondecreasing in m.
    for (const auto& row : report.rows) {
        for (std::size_t i = 0; i < row.map_at.size(); ++i) {
            CHECK(row.map_at[i] >= 0.0);
            CHECK(row.map_at[i] <= 1.0);
            if (i > 0) CHECK(row.map_at[i] >= row.map_at[i - 1]);
        }
    }
}

TEST_CASE("evaluate accumulates in id-sorted order, not input order") {
    auto [predictions, truths] = hand_fixture();
    const auto baseline = evaluate(predictions, truths, {1, 3, 5});

    std::reverse(predictions.begin(), predictions.end());
    SplitMix64 rng(3);
    for (std::size_t i = truths.size(); i > 1; --i) {
        std::swap(truths[i - 1], truths[rng.next_below(i)]);
    }
    const auto shuffled = evaluate(predictions, truths, {1, 3, 5});
    for (std::size_t r = 0; r < baseline.rows.size(); ++r) {
        for (std::size_t m = 0; m < baseline.m_values.size(); ++m) {
            CHECK(baseline.rows[r].map_at[m] == shuffled.rows[r].map_at[m]);
        }
    }
}

TEST_CASE("evaluate rejects misaligned or duplicated instance ids") {
    auto [predictions, truths] = hand_fixture();

    auto duplicated = predictions;
    duplicated.push_back(predictions[0]);
    CHECK_THROWS_WITH_AS(evaluate(duplicated, truths, {1}),
                         doctest::Contains("duplicate prediction for instance 'i01'"),
                         InputError);

    auto duplicated_truths = truths;
    duplicated_truths.push_back(truths[3]);
    CHECK_THROWS_WITH_AS(evaluate(predictions, duplicated_truths, {1}),
                         doctest::Contains("duplicate truth for instance 'i04'"), InputError);

    auto missing_truth = truths;
    missing_truth.pop_back();
    CHECK_THROWS_WITH_AS(evaluate(predictions, missing_truth, {1}),
                         doctest::Contains("prediction instance 'i10' has no matching truth"),
                         InputError);

    auto missing_prediction = predictions;
    missing_prediction.erase(missing_prediction.begin());
    CHECK_THROWS_WITH_AS(evaluate(missing_prediction, truths, {1}),
                         doctest::Contains("truth instance 'i01' has no matching prediction"),
                         InputError);

    CHECK_THROWS_WITH_AS(evaluate(predictions, truths, {}),
                         doctest::Contains("at least one MAP cutoff"), InputError);
    CHECK_THROWS_WITH_AS(evaluate(predictions, truths, {3, 0}),
                         doctest::Contains("at least 1"), InputError);
}

TEST_CASE("simple aggregates: mean of per-instance scores") {
    const auto truth = mt::label_of("True_Correct:NA");
    std::vector<StagePredictions> predictions;
    std::vector<TruthRow> truths;
    const std::size_t ranks[] = {1, 2, 9};  // scores 1.0, 0.5, 0.0 at m=3
    for (std::size_t i = 0; i < 3; ++i) {
        StagePredictions p;
        p.instance_id = "n" + std::to_string(i);
        p.retrieval = with_truth_at(ranks[i], 9, truth);
        p.reranking = p.retrieval;
        p.fused = p.retrieval;
        predictions.push_back(std::move(p));
        truths.push_back({"n" + std::to_string(i), truth});
    }
    const auto report = evaluate(predictions, truths, {3});
    for (const auto& row : report.rows) CHECK(row.map_at[0] == 0.5);

    const auto empty = evaluate({}, {}, {3});
    CHECK(empty.instance_count == 0);
    for (const auto& row : empty.rows) CHECK(row.map_at[0] == 0.0);
}

TEST_CASE("report table and json carry the same numbers") {
    const auto [predictions, truths] = hand_fixture();
    const auto report = evaluate(predictions, truths, {1, 3, 5});

    const std::string table = format_report_table(report);
    CHECK(table.find("stage") != std::string::npos);
    CHECK(table.find("MAP@1") != std::string::npos);
    CHECK(table.find("MAP@3") != std::string::npos);
    CHECK(table.find("MAP@5") != std::string::npos);
    CHECK(table.find("retrieval") != std::string::npos);
    CHECK(table.find("reranking") != std::string::npos);
    CHECK(table.find("fused") != std::string::npos);
    CHECK(table.find("0.3667") != std::string::npos);   // retrieval MAP@3, 4 decimals
    CHECK(table.find("0.6783") != std::string::npos);   // fused MAP@5
    CHECK(table.find("instances: 10") != std::string::npos);

    std::ostringstream out;
    write_report_json(out, report);
    const json obj = json::parse(out.str());
    CHECK(obj.at("instances") == 10);
    CHECK(obj.at("m_values") == json::array({1, 3, 5}));
    REQUIRE(obj.at("rows").size() == 3);
    CHECK(obj.at("rows").at(0).at("stage") == "retrieval");
    CHECK(obj.at("rows").at(0).at("map_at").at("3").get<double>() ==
          report.rows[0].map_at[1]);
    CHECK(obj.at("rows").at(2).at("stage") == "fused");
    CHECK(obj.at("rows").at(2).at("map_at").at("5").get<double>() ==
          report.rows[2].map_at[2]);
}

TEST_CASE("prediction rows round-trip preserving positional order") {
    // A fused head with an appended tail: the third item outscores the head,
    // and its position must survive the round trip anyway.
    std::vector<ScoredItem> items = {{mt::label_of("True_Correct:NA"), 0.9},
                                     {mt::label_of("False_Neither:NA"), 0.5},
                                     {mt::label_of("False_Misconception:Adding_error"), 2.0}};
    PredictionRow row{"p1", ScoredRanking(items)};

    std::ostringstream out;
    write_predictions_jsonl(out, {row});
    CHECK(out.str() ==
          "{\"instance_id\":\"p1\",\"ranked\":[\"True_Correct:NA\",\"False_Neither:NA\","
          "\"False_Misconception:Adding_error\"],\"scores\":[0.9,0.5,2.0]}\n");

    std::istringstream in(out.str());
    const auto rows = read_predictions_jsonl(in);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].instance_id == "p1");
    REQUIRE(rows[0].ranking.size() == 3);
    CHECK(rows[0].ranking.items()[0].label.canonical() == "True_Correct:NA");
    CHECK(rows[0].ranking.items()[2].label.canonical() == "False_Misconception:Adding_error");
    CHECK(rows[0].ranking.items()[2].score == 2.0);
    CHECK(rows[0].ranking.rank_of(mt::label_of("False_Neither:NA")) == 2);
}

TEST_CASE("prediction reader rejects broken lines") {
    std::istringstream mismatched(
        "{\"instance_id\":\"p1\",\"ranked\":[\"True_Correct:NA\"],\"scores\":[1.0,2.0]}\n");
    CHECK_THROWS_WITH_AS(read_predictions_jsonl(mismatched),
                         doctest::Contains("ranked and scores lengths differ"), InputError);

    std::istringstream missing_key("{\"instance_id\":\"p1\"}\n");
    CHECK_THROWS_WITH_AS(read_predictions_jsonl(missing_key),
                         doctest::Contains("predictions line 1"), InputError);

    std::istringstream duplicate_label(
        "{\"instance_id\":\"p1\",\"ranked\":[\"True_Correct:NA\",\"True_Correct:NA\"],"
        "\"scores\":[1.0,0.5]}\n");
    CHECK_THROWS_WITH_AS(read_predictions_jsonl(duplicate_label),
                         doctest::Contains("twice"), InputError);

    CHECK_THROWS_WITH_AS(read_predictions_file("/nonexistent/predictions.jsonl"),
                         doctest::Contains("cannot open predictions file"), InputError);
}
