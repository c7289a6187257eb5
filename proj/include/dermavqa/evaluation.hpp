#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dermavqa/common.hpp"

namespace dvqa {

struct FamilyScore {
    std::string base_qid;
    double accuracy = 0.0;
    int n = 0;  // encounters scored
};

struct AgreementMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> rates;  // percentages, symmetric, diag 100
};

// How a family's predicted slot indices are compared against gold. The
// challenge's exact multi-slot rule is not published, so the policy is
// swappable.
class SlotScoringPolicy {
public:
    virtual ~SlotScoringPolicy() = default;
    virtual double score(std::vector<int> predicted, std::vector<int> gold) const = 0;
    virtual std::string name() const = 0;
};

// Sorts both index lists before positional comparison.
class SortedAlignmentPolicy : public SlotScoringPolicy {
public:
    double score(std::vector<int> predicted, std::vector<int> gold) const override;
    std::string name() const override { return "sorted_alignment"; }
};

// Compares slots in their given order, no sorting.
class StrictPositionalPolicy : public SlotScoringPolicy {
public:
    double score(std::vector<int> predicted, std::vector<int> gold) const override;
    std::string name() const override { return "strict_positional"; }
};

// encounter -> slot indices for one family (slot order = definition order).
using FamilyPredictions = std::map<std::string, std::vector<int>>;

FamilyScore score_family(const FamilyPredictions& predictions, const FamilyPredictions& gold,
                         const std::string& base_qid,
                         const SlotScoringPolicy& policy = SortedAlignmentPolicy());

// Unweighted mean; exactly one score per family required.
double average_accuracy(const std::vector<FamilyScore>& family_scores,
                        const std::vector<std::string>& expected_families = {});

// model -> (encounter, qid) -> index
using PredictionSets = std::map<std::string, std::map<std::pair<std::string, std::string>, int>>;

// rate(i,j) = 100 * exact index matches / shared keys. Coverage must match.
AgreementMatrix agreement_matrix(const PredictionSets& prediction_sets);

void write_scores_csv(const std::filesystem::path& path,
                      const std::vector<FamilyScore>& scores, double average);
void write_agreement_csv(const std::filesystem::path& path, const AgreementMatrix& matrix);

}  // namespace dvqa
