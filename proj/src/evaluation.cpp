#include "dermavqa/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "dermavqa/csv.hpp"

namespace dvqa {

namespace {

double positional_match_rate(const std::vector<int>& predicted, const std::vector<int>& gold) {
    size_t compared = std::max(predicted.size(), gold.size());
    if (compared == 0) return 1.0;
    size_t overlap = std::min(predicted.size(), gold.size());
    int matches = 0;
    for (size_t i = 0; i < overlap; ++i)
        if (predicted[i] == gold[i]) ++matches;
    return static_cast<double>(matches) / static_cast<double>(compared);
}

std::string fmt(double value, const char* spec) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, value);
    return buf;
}

}  // namespace

double SortedAlignmentPolicy::score(std::vector<int> predicted, std::vector<int> gold) const {
    std::sort(predicted.begin(), predicted.end());
    std::sort(gold.begin(), gold.end());
    return positional_match_rate(predicted, gold);
}

double StrictPositionalPolicy::score(std::vector<int> predicted, std::vector<int> gold) const {
    return positional_match_rate(predicted, gold);
}

FamilyScore score_family(const FamilyPredictions& predictions, const FamilyPredictions& gold,
                         const std::string& base_qid, const SlotScoringPolicy& policy) {
    std::vector<std::string> missing_in_pred, missing_in_gold;
    for (const auto& [encounter, _] : gold)
        if (!predictions.count(encounter)) missing_in_pred.push_back(encounter);
    for (const auto& [encounter, _] : predictions)
        if (!gold.count(encounter)) missing_in_gold.push_back(encounter);
    if (!missing_in_pred.empty() || !missing_in_gold.empty()) {
        std::string msg = "score_family " + base_qid + ": encounter coverage mismatch";
        if (!missing_in_pred.empty())
            msg += "; missing from predictions: " + join(missing_in_pred, ", ");
        if (!missing_in_gold.empty())
            msg += "; missing from gold: " + join(missing_in_gold, ", ");
        throw IntegrityError(msg);
    }

    FamilyScore score;
    score.base_qid = base_qid;
    score.n = static_cast<int>(gold.size());
    if (score.n == 0) return score;

    double total = 0.0;
    for (const auto& [encounter, gold_indices] : gold)
        total += policy.score(predictions.at(encounter), gold_indices);
    score.accuracy = total / score.n;
    return score;
}

double average_accuracy(const std::vector<FamilyScore>& family_scores,
                        const std::vector<std::string>& expected_families) {
    if (family_scores.empty())
        throw IntegrityError("average_accuracy: no family scores");
    std::set<std::string> seen;
    for (const auto& score : family_scores)
        if (!seen.insert(score.base_qid).second)
            throw IntegrityError("average_accuracy: duplicate family " + score.base_qid);
    if (!expected_families.empty()) {
        std::vector<std::string> missing;
        for (const auto& family : expected_families)
            if (!seen.count(family)) missing.push_back(family);
        if (!missing.empty())
            throw IntegrityError("average_accuracy: missing families: " + join(missing, ", "));
        if (seen.size() != expected_families.size())
            throw IntegrityError("average_accuracy: unexpected extra families present");
    }
    double total = 0.0;
    for (const auto& score : family_scores) total += score.accuracy;
    return total / family_scores.size();
}

AgreementMatrix agreement_matrix(const PredictionSets& prediction_sets) {
    if (prediction_sets.empty())
        throw IntegrityError("agreement_matrix: no prediction sets");

    const auto& reference = prediction_sets.begin()->second;
    for (const auto& [model, set] : prediction_sets) {
        if (set.size() != reference.size())
            throw IntegrityError("agreement_matrix: key count mismatch for " + model);
        for (const auto& [key, _] : set)
            if (!reference.count(key))
                throw IntegrityError("agreement_matrix: key mismatch for " + model + " (" +
                                     key.first + "/" + key.second + ")");
    }

    AgreementMatrix matrix;
    for (const auto& [model, _] : prediction_sets) matrix.labels.push_back(model);
    size_t n = matrix.labels.size();
    matrix.rates.assign(n, std::vector<double>(n, 0.0));

    for (size_t i = 0; i < n; ++i) {
        matrix.rates[i][i] = 100.0;
        const auto& set_i = prediction_sets.at(matrix.labels[i]);
        for (size_t j = i + 1; j < n; ++j) {
            const auto& set_j = prediction_sets.at(matrix.labels[j]);
            int matches = 0;
            for (const auto& [key, index] : set_i)
                if (set_j.at(key) == index) ++matches;
            double rate = reference.empty()
                              ? 100.0
                              : 100.0 * matches / static_cast<double>(reference.size());
            matrix.rates[i][j] = rate;
            matrix.rates[j][i] = rate;
        }
    }
    return matrix;
}

void write_scores_csv(const std::filesystem::path& path,
                      const std::vector<FamilyScore>& scores, double average) {
    std::vector<FamilyScore> sorted = scores;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.base_qid < b.base_qid; });
    std::vector<csv::Row> rows;
    rows.push_back({"family", "accuracy", "n"});
    int total_n = 0;
    for (const auto& score : sorted) {
        rows.push_back({score.base_qid, fmt(score.accuracy, "%.6f"), std::to_string(score.n)});
        total_n += score.n;
    }
    rows.push_back({"average", fmt(average, "%.6f"), std::to_string(total_n)});
    csv::write_file(path, rows);
}

void write_agreement_csv(const std::filesystem::path& path, const AgreementMatrix& matrix) {
    std::vector<csv::Row> rows;
    csv::Row header = {"model"};
    header.insert(header.end(), matrix.labels.begin(), matrix.labels.end());
    rows.push_back(header);
    for (size_t i = 0; i < matrix.labels.size(); ++i) {
        csv::Row row = {matrix.labels[i]};
        for (double rate : matrix.rates[i]) row.push_back(fmt(rate, "%.4f"));
        rows.push_back(row);
    }
    csv::write_file(path, rows);
}

}  // namespace dvqa
