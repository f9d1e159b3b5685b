#pragma once

#include <string>
#include <vector>

#include "polybite/errors.hpp"

namespace polybite {

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dimension() const { return values.size(); }

    bool operator==(const EmbeddingVector&) const = default;
};

/// One (candidate, reference) audit pair with both quality scores attached.
struct MetricSample {
    std::string candidate;
    std::string reference;
    double bleu = 0.0;    // [0,1]
    double cosine = 0.0;  // [-1,1]
};

/// Five-number summary plus mean, as drawn in boxplots.
struct DistributionSummary {
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
    double mean = 0.0;
    std::size_t count = 0;
};

/// Symmetric matrix with unit diagonal. Cells that cannot be computed
/// (insufficient aligned pairs, zero variance) are marked undefined and
/// render as "NA" downstream.
struct CorrelationMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> values;      // NaN where undefined
    std::vector<std::vector<bool>> defined;
    std::vector<std::vector<std::size_t>> n_pairs;

    std::size_t size() const { return labels.size(); }
};

/// Lowercases, splits punctuation into standalone tokens, splits on
/// whitespace. Placeholder slots ({GENDER1}) survive as single verbatim
/// tokens so BLEU treats them as atoms.
std::vector<std::string> tokenize(const std::string& text);

/// Sentence-level smoothed BLEU-4 over the given tokenizer:
/// n-gram orders 1..4 (orders the candidate is too short for are dropped),
/// uniform weights, clipped modified precision, brevity penalty
/// exp(1 - r/c) for c < r with r the closest reference length (ties favor
/// the shorter), and zero-match precisions replaced by eps = 1e-9.
/// Returns 1.0 exactly when the candidate equals a reference token-for-token.
double bleu(const std::string& candidate, const std::vector<std::string>& references);

/// dot(a,b) / (|a||b|), clamped to [-1,1] against rounding.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

/// Sample Pearson correlation coefficient.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

/// Quartiles by linear interpolation between closest order statistics
/// (position q*(n-1) on the sorted sample).
DistributionSummary summarize(const std::vector<double>& values);

}  // namespace polybite
