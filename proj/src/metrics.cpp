#include "polybite/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "polybite/template_model.hpp"

namespace polybite {

namespace {

constexpr double kBleuEps = 1e-9;

bool is_ascii_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v';
}

bool is_ascii_punct(unsigned char c) {
    return std::ispunct(c) != 0 && c < 0x80;
}

// Multibyte punctuation that shows up in the operating languages.
const std::vector<std::string> kWidePunct = {
    "¿", "¡", "«", "»", "“", "”",
    "‘", "’", "–", "—", "…",
};

// Returns byte length of the wide punctuation mark starting at i, or 0.
std::size_t wide_punct_at(const std::string& s, std::size_t i) {
    for (const std::string& p : kWidePunct)
        if (s.compare(i, p.size(), p) == 0) return p.size();
    return 0;
}

void tokenize_plain(const std::string& text, std::vector<std::string>& out) {
    std::string word;
    auto flush = [&] {
        if (!word.empty()) {
            out.push_back(word);
            word.clear();
        }
    };
    std::size_t i = 0;
    while (i < text.size()) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (is_ascii_space(c) || text.compare(i, 2, " ") == 0) {
            flush();
            i += is_ascii_space(c) ? 1 : 2;
            continue;
        }
        if (is_ascii_punct(c)) {
            flush();
            out.push_back(std::string(1, static_cast<char>(c)));
            ++i;
            continue;
        }
        if (std::size_t w = wide_punct_at(text, i); w > 0) {
            flush();
            out.push_back(text.substr(i, w));
            i += w;
            continue;
        }
        word += static_cast<char>(std::tolower(c));
        ++i;
    }
    flush();
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    // Placeholders are atomic tokens; split the text around them first.
    std::size_t cursor = 0;
    for (const PlaceholderSpan& span : scan_placeholder_spans(text)) {
        tokenize_plain(text.substr(cursor, span.begin - cursor), out);
        out.push_back(span.placeholder.token());
        cursor = span.end;
    }
    tokenize_plain(text.substr(cursor), out);
    return out;
}

double bleu(const std::string& candidate, const std::vector<std::string>& references) {
    if (candidate.empty() || references.empty())
        throw MetricError("empty-input", "bleu requires a candidate and at least one reference");
    for (const std::string& r : references)
        if (r.empty()) throw MetricError("empty-input", "bleu reference is empty");

    const std::vector<std::string> cand = tokenize(candidate);
    if (cand.empty()) throw MetricError("empty-input", "candidate has no tokens");
    std::vector<std::vector<std::string>> refs;
    refs.reserve(references.size());
    for (const std::string& r : references) {
        refs.push_back(tokenize(r));
        if (refs.back().empty()) throw MetricError("empty-input", "reference has no tokens");
    }

    using Ngram = std::vector<std::string>;
    auto count_ngrams = [](const std::vector<std::string>& toks, std::size_t n) {
        std::map<Ngram, std::size_t> counts;
        if (toks.size() < n) return counts;
        for (std::size_t i = 0; i + n <= toks.size(); ++i)
            ++counts[Ngram(toks.begin() + static_cast<long>(i),
                           toks.begin() + static_cast<long>(i + n))];
        return counts;
    };

    double log_sum = 0.0;
    std::size_t orders = 0;
    for (std::size_t n = 1; n <= 4; ++n) {
        if (cand.size() < n) break;  // too short for this order
        auto cand_counts = count_ngrams(cand, n);
        std::size_t total = 0, matched = 0;
        for (const auto& [gram, c] : cand_counts) {
            total += c;
            std::size_t best = 0;
            for (const auto& ref : refs) {
                auto rc = count_ngrams(ref, n);
                auto it = rc.find(gram);
                if (it != rc.end()) best = std::max(best, it->second);
            }
            matched += std::min(c, best);
        }
        double precision = matched > 0 ? static_cast<double>(matched) / static_cast<double>(total)
                                       : kBleuEps;
        log_sum += std::log(precision);
        ++orders;
    }

    const double c = static_cast<double>(cand.size());
    std::size_t r_len = refs.front().size();
    for (const auto& ref : refs) {
        double cur = std::abs(static_cast<double>(ref.size()) - c);
        double best = std::abs(static_cast<double>(r_len) - c);
        if (cur < best || (cur == best && ref.size() < r_len)) r_len = ref.size();
    }
    const double bp = c < static_cast<double>(r_len)
                          ? std::exp(1.0 - static_cast<double>(r_len) / c)
                          : 1.0;

    double score = bp * std::exp(log_sum / static_cast<double>(orders));
    return std::clamp(score, 0.0, 1.0);
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension())
        throw MetricError("dimension-mismatch",
                          "cosine_similarity: " + std::to_string(a.dimension()) + " vs " +
                              std::to_string(b.dimension()));
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0)
        throw MetricError("zero-vector", "cosine_similarity of a zero vector is undefined");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw MetricError("length-mismatch", "pearson requires equal-length vectors");
    if (x.size() < 2) throw MetricError("empty-input", "pearson requires at least 2 samples");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double cov = 0.0, vx = 0.0, vy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        cov += (x[i] - mx) * (y[i] - my);
        vx += (x[i] - mx) * (x[i] - mx);
        vy += (y[i] - my) * (y[i] - my);
    }
    if (vx == 0.0 || vy == 0.0)
        throw MetricError("zero-variance", "pearson is undefined for constant input");
    return std::clamp(cov / std::sqrt(vx * vy), -1.0, 1.0);
}

DistributionSummary summarize(const std::vector<double>& values) {
    if (values.empty()) throw MetricError("empty-input", "summarize requires a non-empty sample");
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&sorted](double q) {
        const double pos = q * static_cast<double>(sorted.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(lo);
        if (lo + 1 >= sorted.size()) return sorted[lo];
        return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
    };
    DistributionSummary s;
    s.min = sorted.front();
    s.q1 = quantile(0.25);
    s.median = quantile(0.5);
    s.q3 = quantile(0.75);
    s.max = sorted.back();
    s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) /
             static_cast<double>(sorted.size());
    s.count = sorted.size();
    return s;
}

}  // namespace polybite
