#include "polybite/reporting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace polybite {

using nlohmann::json;

namespace {

std::string fmt(double value, int decimals = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return buf;
}

std::string fmt_opt(const std::optional<double>& value, int decimals = 4) {
    return value ? fmt(*value, decimals) : "NA";
}

std::optional<double> mean_of_defined(const std::vector<std::optional<double>>& values) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : values)
        if (v) {
            sum += *v;
            ++n;
        }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

// CSV fields are simple identifiers and numbers; quote only when needed.
std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("io-failure", "cannot write " + path);
    out << content;
}

}  // namespace

// -- bundle assembly ----------------------------------------------------------------

ReportBundle build_reports(const std::vector<BatchReport>& batches) {
    if (batches.empty())
        throw MetricError("empty-input", "build_reports needs at least one batch");

    ReportBundle bundle;
    std::set<std::string> concerns, languages, models;
    for (const BatchReport& b : batches) {
        concerns.insert(b.concern);
        languages.insert(b.language);
        models.insert(b.model_id);
    }
    bundle.concerns.assign(concerns.begin(), concerns.end());
    bundle.languages.assign(languages.begin(), languages.end());
    bundle.models.assign(models.begin(), models.end());

    bundle.batches = batches;
    std::sort(bundle.batches.begin(), bundle.batches.end(),
              [](const BatchReport& a, const BatchReport& b) {
                  return std::tie(a.model_id, a.language, a.concern) <
                         std::tie(b.model_id, b.language, b.concern);
              });

    // radar tables
    for (const BatchReport& b : bundle.batches) {
        ReportBundle::RadarCell cell;
        cell.pass_rate = b.pass_rate;
        cell.n_valid = b.passes + b.fails;
        bundle.radar[b.concern][{b.language, b.model_id}] = cell;
    }

    // heatmap: mean of defined concern pass rates per (language, model)
    for (const std::string& language : bundle.languages) {
        for (const std::string& model : bundle.models) {
            std::vector<std::optional<double>> rates;
            for (const std::string& concern : bundle.concerns) {
                auto concern_it = bundle.radar.find(concern);
                if (concern_it == bundle.radar.end()) continue;
                auto cell = concern_it->second.find({language, model});
                if (cell != concern_it->second.end()) rates.push_back(cell->second.pass_rate);
            }
            bundle.heatmap[{language, model}] = mean_of_defined(rates);
        }
    }
    for (const std::string& language : bundle.languages) {
        std::vector<std::optional<double>> cells;
        for (const std::string& model : bundle.models)
            cells.push_back(bundle.heatmap[{language, model}]);
        bundle.heatmap_language_means[language] = mean_of_defined(cells);
    }
    for (const std::string& model : bundle.models) {
        std::vector<std::optional<double>> cells;
        for (const std::string& language : bundle.languages)
            cells.push_back(bundle.heatmap[{language, model}]);
        bundle.heatmap_model_means[model] = mean_of_defined(cells);
    }
    {
        std::vector<std::optional<double>> cells;
        for (const auto& [_, v] : bundle.heatmap) cells.push_back(v);
        bundle.heatmap_grand_mean = mean_of_defined(cells);
    }

    // Pearson over languages: vectors aligned on (model, concern) pairs
    const std::size_t n_langs = bundle.languages.size();
    auto rate_of = [&](const std::string& language, const std::string& model,
                       const std::string& concern) -> std::optional<double> {
        auto concern_it = bundle.radar.find(concern);
        if (concern_it == bundle.radar.end()) return std::nullopt;
        auto cell = concern_it->second.find({language, model});
        if (cell == concern_it->second.end()) return std::nullopt;
        return cell->second.pass_rate;
    };

    CorrelationMatrix& matrix = bundle.pearson_by_language;
    matrix.labels = bundle.languages;
    matrix.values.assign(n_langs, std::vector<double>(n_langs, 0.0));
    matrix.defined.assign(n_langs, std::vector<bool>(n_langs, false));
    matrix.n_pairs.assign(n_langs, std::vector<std::size_t>(n_langs, 0));

    for (std::size_t i = 0; i < n_langs; ++i) {
        for (std::size_t j = i; j < n_langs; ++j) {
            std::vector<double> x, y;
            for (const std::string& model : bundle.models) {
                for (const std::string& concern : bundle.concerns) {
                    auto a = rate_of(bundle.languages[i], model, concern);
                    auto b = rate_of(bundle.languages[j], model, concern);
                    if (a && b) {
                        x.push_back(*a);
                        y.push_back(*b);
                    }
                }
            }
            matrix.n_pairs[i][j] = matrix.n_pairs[j][i] = x.size();
            if (i == j) {
                matrix.values[i][i] = 1.0;
                matrix.defined[i][i] = true;
                continue;
            }
            if (x.size() < 2) {
                matrix.values[i][j] = matrix.values[j][i] =
                    std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            try {
                double r = pearson(x, y);
                matrix.values[i][j] = matrix.values[j][i] = r;
                matrix.defined[i][j] = matrix.defined[j][i] = true;
            } catch (const MetricError&) {
                matrix.values[i][j] = matrix.values[j][i] =
                    std::numeric_limits<double>::quiet_NaN();
            }
        }
    }

    // fault tables: unweighted mean of batch fault rates per group
    auto mean_faults = [&](auto key_of) {
        std::map<std::string, std::pair<double, std::size_t>> acc;
        for (const BatchReport& b : bundle.batches) {
            auto& slot = acc[key_of(b)];
            slot.first += b.fault_rate;
            slot.second += 1;
        }
        std::map<std::string, double> out;
        for (const auto& [key, slot] : acc)
            out[key] = slot.first / static_cast<double>(slot.second);
        return out;
    };
    bundle.faults_by_model = mean_faults([](const BatchReport& b) { return b.model_id; });
    bundle.faults_by_concern = mean_faults([](const BatchReport& b) { return b.concern; });
    bundle.faults_by_language = mean_faults([](const BatchReport& b) { return b.language; });

    std::size_t zero = 0, low = 0, high = 0;
    for (const BatchReport& b : bundle.batches) {
        if (b.fault_rate == 0.0) ++zero;
        else if (b.fault_rate <= 10.0) ++low;
        else ++high;
    }
    const double n_batches = static_cast<double>(bundle.batches.size());
    bundle.zero_fault_batch_share = 100.0 * static_cast<double>(zero) / n_batches;
    bundle.low_fault_batch_share = 100.0 * static_cast<double>(low) / n_batches;
    bundle.high_fault_batch_share = 100.0 * static_cast<double>(high) / n_batches;

    return bundle;
}

// -- SVG helpers ----------------------------------------------------------------------

namespace {

struct SvgBuilder {
    std::ostringstream body;
    int width;
    int height;

    SvgBuilder(int w, int h) : width(w), height(h) {}

    std::string finish() const {
        std::ostringstream out;
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
            << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
            << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n"
            << body.str() << "</svg>\n";
        return out.str();
    }

    void text(double x, double y, const std::string& s, int size = 11,
              const std::string& anchor = "start") {
        body << "<text x=\"" << fmt(x, 1) << "\" y=\"" << fmt(y, 1) << "\" font-size=\"" << size
             << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << s
             << "</text>\n";
    }

    void line(double x1, double y1, double x2, double y2, const std::string& stroke = "#999") {
        body << "<line x1=\"" << fmt(x1, 1) << "\" y1=\"" << fmt(y1, 1) << "\" x2=\"" << fmt(x2, 1)
             << "\" y2=\"" << fmt(y2, 1) << "\" stroke=\"" << stroke << "\"/>\n";
    }

    void rect(double x, double y, double w, double h, const std::string& fill) {
        body << "<rect x=\"" << fmt(x, 1) << "\" y=\"" << fmt(y, 1) << "\" width=\"" << fmt(w, 1)
             << "\" height=\"" << fmt(h, 1) << "\" fill=\"" << fill
             << "\" stroke=\"#333\" stroke-width=\"0.5\"/>\n";
    }

    void polygon(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                 bool close) {
        body << (close ? "<polygon" : "<polyline") << " points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i) body << " ";
            body << fmt(pts[i].first, 1) << "," << fmt(pts[i].second, 1);
        }
        body << "\" fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\"/>\n";
    }
};

const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                               "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

// green (100) .. red (0)
std::string rate_color(const std::optional<double>& rate) {
    if (!rate) return "#dddddd";
    double t = std::clamp(*rate / 100.0, 0.0, 1.0);
    int r = static_cast<int>(std::lround(220.0 - 150.0 * t));
    int g = static_cast<int>(std::lround(70.0 + 150.0 * t));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "#%02x%02x46", r, g);
    return buf;
}

// blue (-1) .. white (0) .. red (+1)
std::string correlation_color(double r) {
    double t = std::clamp(r, -1.0, 1.0);
    int red = static_cast<int>(std::lround(t > 0 ? 255 : 255 * (1 + t)));
    int blue = static_cast<int>(std::lround(t < 0 ? 255 : 255 * (1 - t)));
    int green = static_cast<int>(std::lround(255 * (1 - std::abs(t))));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", red, green, blue);
    return buf;
}

std::string radar_svg(const ReportBundle& bundle, const std::string& concern) {
    const auto& cells = bundle.radar.at(concern);
    const std::size_t axes = bundle.languages.size();
    const double cx = 260, cy = 240, radius = 160;
    SvgBuilder svg(620, 480);
    svg.text(20, 24, "pass rate by language: " + concern, 14);

    const double two_pi = 6.283185307179586;
    auto point = [&](std::size_t axis, double rate) {
        double angle = two_pi * static_cast<double>(axis) / static_cast<double>(axes) -
                       two_pi / 4.0;
        double rr = radius * std::clamp(rate, 0.0, 100.0) / 100.0;
        return std::make_pair(cx + rr * std::cos(angle), cy + rr * std::sin(angle));
    };

    for (int ring = 1; ring <= 4; ++ring) {
        std::vector<std::pair<double, double>> pts;
        for (std::size_t a = 0; a < axes; ++a)
            pts.push_back(point(a, 25.0 * ring));
        svg.polygon(pts, "#cccccc", true);
    }
    for (std::size_t a = 0; a < axes; ++a) {
        auto [x, y] = point(a, 100.0);
        svg.line(cx, cy, x, y, "#cccccc");
        auto [lx, ly] = point(a, 116.0);
        svg.text(lx, ly, bundle.languages[a], 11, "middle");
    }

    for (std::size_t m = 0; m < bundle.models.size(); ++m) {
        const std::string& model = bundle.models[m];
        std::vector<std::pair<double, double>> pts;
        for (std::size_t a = 0; a < axes; ++a) {
            auto it = cells.find({bundle.languages[a], model});
            double rate = 0.0;  // undefined renders at the origin
            if (it != cells.end() && it->second.pass_rate) rate = *it->second.pass_rate;
            pts.push_back(point(a, rate));
        }
        const std::string color = kSeriesColors[m % 8];
        svg.polygon(pts, color, true);
        svg.rect(470, 60 + 20 * static_cast<double>(m), 12, 12, color);
        svg.text(488, 70 + 20 * static_cast<double>(m), model, 11);
    }
    return svg.finish();
}

std::string heatmap_svg(const ReportBundle& bundle) {
    const double cell_w = 90, cell_h = 34, left = 110, top = 70;
    const std::size_t cols = bundle.models.size() + 1;  // + language mean
    const std::size_t rows = bundle.languages.size() + 1;
    SvgBuilder svg(static_cast<int>(left + cell_w * static_cast<double>(cols)) + 40,
                   static_cast<int>(top + cell_h * static_cast<double>(rows)) + 40);
    svg.text(20, 24, "mean pass rate by language and model", 14);

    for (std::size_t c = 0; c < bundle.models.size(); ++c)
        svg.text(left + cell_w * (static_cast<double>(c) + 0.5), top - 10, bundle.models[c], 11,
                 "middle");
    svg.text(left + cell_w * (static_cast<double>(bundle.models.size()) + 0.5), top - 10, "mean",
             11, "middle");

    for (std::size_t r = 0; r < rows; ++r) {
        const bool mean_row = r == bundle.languages.size();
        const std::string row_label = mean_row ? "mean" : bundle.languages[r];
        svg.text(left - 8, top + cell_h * (static_cast<double>(r) + 0.62), row_label, 11, "end");
        for (std::size_t c = 0; c < cols; ++c) {
            const bool mean_col = c == bundle.models.size();
            std::optional<double> value;
            if (mean_row && mean_col) value = bundle.heatmap_grand_mean;
            else if (mean_row) value = bundle.heatmap_model_means.at(bundle.models[c]);
            else if (mean_col) value = bundle.heatmap_language_means.at(bundle.languages[r]);
            else value = bundle.heatmap.at({bundle.languages[r], bundle.models[c]});
            double x = left + cell_w * static_cast<double>(c);
            double y = top + cell_h * static_cast<double>(r);
            svg.rect(x, y, cell_w, cell_h, rate_color(value));
            svg.text(x + cell_w / 2, y + cell_h / 2 + 4,
                     value ? fmt(*value, 1) : std::string("NA"), 11, "middle");
        }
    }
    return svg.finish();
}

std::string pearson_svg(const ReportBundle& bundle) {
    const CorrelationMatrix& m = bundle.pearson_by_language;
    const double cell = 56, left = 90, top = 70;
    const std::size_t n = m.size();
    SvgBuilder svg(static_cast<int>(left + cell * static_cast<double>(n)) + 40,
                   static_cast<int>(top + cell * static_cast<double>(n)) + 40);
    svg.text(20, 24, "Pearson correlation of pass rates across languages", 14);
    for (std::size_t i = 0; i < n; ++i) {
        svg.text(left + cell * (static_cast<double>(i) + 0.5), top - 10, m.labels[i], 11,
                 "middle");
        svg.text(left - 8, top + cell * (static_cast<double>(i) + 0.58), m.labels[i], 11, "end");
        for (std::size_t j = 0; j < n; ++j) {
            double x = left + cell * static_cast<double>(j);
            double y = top + cell * static_cast<double>(i);
            if (m.defined[i][j]) {
                svg.rect(x, y, cell, cell, correlation_color(m.values[i][j]));
                svg.text(x + cell / 2, y + cell / 2 + 4, fmt(m.values[i][j], 2), 10, "middle");
            } else {
                svg.rect(x, y, cell, cell, "#dddddd");
                svg.text(x + cell / 2, y + cell / 2 + 4, "NA", 10, "middle");
            }
        }
    }
    return svg.finish();
}

std::string boxplot_svg(const PipelineComparisonReport& report) {
    std::vector<const PipelineComparisonCell*> cells;
    for (const auto& cell : report.cells)
        if (!cell.language.empty()) cells.push_back(&cell);
    const double box_w = 42, gap = 36, left = 80, bottom = 330, top = 60;
    SvgBuilder svg(static_cast<int>(left + (box_w + gap) * static_cast<double>(cells.size())) + 60,
                   420);
    svg.text(20, 24, "cosine similarity vs reference by pipeline order", 14);

    auto y_of = [&](double v) { return bottom - (bottom - top) * std::clamp(v, 0.0, 1.0); };
    for (int tick = 0; tick <= 4; ++tick) {
        double v = 0.25 * tick;
        svg.line(left - 10, y_of(v), left + (box_w + gap) * static_cast<double>(cells.size()),
                 y_of(v), "#eeeeee");
        svg.text(left - 14, y_of(v) + 4, fmt(v, 2), 10, "end");
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const PipelineComparisonCell& c = *cells[i];
        double x = left + (box_w + gap) * static_cast<double>(i) + gap / 2;
        const std::string color = c.order == "t2p" ? "#1f77b4" : "#d62728";
        svg.line(x + box_w / 2, y_of(c.cosine.min), x + box_w / 2, y_of(c.cosine.max), color);
        svg.rect(x, y_of(c.cosine.q3), box_w, y_of(c.cosine.q1) - y_of(c.cosine.q3), "#f7f7f7");
        svg.line(x, y_of(c.cosine.median), x + box_w, y_of(c.cosine.median), color);
        svg.text(x + box_w / 2, bottom + 18, c.order + ":" + c.language, 10, "middle");
        svg.text(x + box_w / 2, bottom + 32, "n=" + std::to_string(c.samples), 9, "middle");
    }
    return svg.finish();
}

}  // namespace

// -- emit -------------------------------------------------------------------------------

void emit(const ReportBundle& bundle, const std::string& directory) {
    std::filesystem::create_directories(directory);
    auto path = [&](const std::string& name) { return directory + "/" + name; };

    {
        std::ostringstream csv;
        csv << "concern,language,model,pass_rate,n_valid\n";
        for (const std::string& concern : bundle.concerns) {
            auto it = bundle.radar.find(concern);
            for (const std::string& language : bundle.languages) {
                for (const std::string& model : bundle.models) {
                    ReportBundle::RadarCell cell;
                    bool present = false;
                    if (it != bundle.radar.end()) {
                        auto c = it->second.find({language, model});
                        if (c != it->second.end()) {
                            cell = c->second;
                            present = true;
                        }
                    }
                    if (!present) continue;  // no batch for this triple
                    csv << csv_field(concern) << "," << csv_field(language) << ","
                        << csv_field(model) << "," << fmt_opt(cell.pass_rate) << ","
                        << cell.n_valid << "\n";
                }
            }
        }
        write_file(path("radar.csv"), csv.str());
    }

    {
        std::ostringstream csv;
        csv << "language,model,mean_pass_rate\n";
        for (const std::string& language : bundle.languages) {
            for (const std::string& model : bundle.models)
                csv << csv_field(language) << "," << csv_field(model) << ","
                    << fmt_opt(bundle.heatmap.at({language, model})) << "\n";
            csv << csv_field(language) << ",ALL,"
                << fmt_opt(bundle.heatmap_language_means.at(language)) << "\n";
        }
        for (const std::string& model : bundle.models)
            csv << "ALL," << csv_field(model) << ","
                << fmt_opt(bundle.heatmap_model_means.at(model)) << "\n";
        csv << "ALL,ALL," << fmt_opt(bundle.heatmap_grand_mean) << "\n";
        write_file(path("heatmap.csv"), csv.str());
    }

    {
        const CorrelationMatrix& m = bundle.pearson_by_language;
        std::ostringstream csv;
        csv << "lang_a,lang_b,r,n_pairs\n";
        for (std::size_t i = 0; i < m.size(); ++i)
            for (std::size_t j = 0; j < m.size(); ++j)
                csv << csv_field(m.labels[i]) << "," << csv_field(m.labels[j]) << ","
                    << (m.defined[i][j] ? fmt(m.values[i][j], 6) : std::string("NA")) << ","
                    << m.n_pairs[i][j] << "\n";
        write_file(path("pearson.csv"), csv.str());
    }

    auto write_fault_table = [&](const std::string& name, const std::string& key_column,
                                 const std::map<std::string, double>& table) {
        std::ostringstream csv;
        csv << key_column << ",pct_unprocessable\n";
        for (const auto& [key, value] : table)
            csv << csv_field(key) << "," << fmt(value) << "\n";
        write_file(path(name), csv.str());
    };
    write_fault_table("faults_by_model.csv", "model", bundle.faults_by_model);
    write_fault_table("faults_by_concern.csv", "concern", bundle.faults_by_concern);
    write_fault_table("faults_by_language.csv", "language", bundle.faults_by_language);

    {
        std::ostringstream csv;
        csv << "model,language,concern,pct_unprocessable\n";
        for (const BatchReport& b : bundle.batches)
            csv << csv_field(b.model_id) << "," << csv_field(b.language) << ","
                << csv_field(b.concern) << "," << fmt(b.fault_rate) << "\n";
        write_file(path("faults_by_batch.csv"), csv.str());
    }

    {
        json doc;
        doc["concerns"] = bundle.concerns;
        doc["languages"] = bundle.languages;
        doc["models"] = bundle.models;
        json batches = json::array();
        for (const BatchReport& b : bundle.batches) {
            json jb = {{"model", b.model_id},     {"language", b.language},
                       {"concern", b.concern},    {"passes", b.passes},
                       {"fails", b.fails},        {"unprocessable", b.unprocessable},
                       {"total", b.total},        {"fault_rate", b.fault_rate}};
            if (b.pass_rate) jb["pass_rate"] = *b.pass_rate;
            batches.push_back(jb);
        }
        doc["batches"] = batches;
        doc["fault_batch_shares"] = {{"zero", bundle.zero_fault_batch_share},
                                     {"le10", bundle.low_fault_batch_share},
                                     {"gt10", bundle.high_fault_batch_share}};
        write_file(path("bundle.json"), doc.dump(2) + "\n");
    }

    for (const std::string& concern : bundle.concerns)
        write_file(path("radar_" + concern + ".svg"), radar_svg(bundle, concern));
    write_file(path("heatmap.svg"), heatmap_svg(bundle));
    write_file(path("pearson.svg"), pearson_svg(bundle));
}

void emit_pipeline_comparison(const PipelineComparisonReport& report,
                              const std::string& directory) {
    std::filesystem::create_directories(directory);
    std::ostringstream csv;
    csv << "order,language,count,min,q1,median,q3,max,mean\n";
    for (const auto& cell : report.cells) {
        csv << cell.order << "," << (cell.language.empty() ? "ALL" : csv_field(cell.language))
            << "," << cell.samples << "," << fmt(cell.cosine.min, 6) << ","
            << fmt(cell.cosine.q1, 6) << "," << fmt(cell.cosine.median, 6) << ","
            << fmt(cell.cosine.q3, 6) << "," << fmt(cell.cosine.max, 6) << ","
            << fmt(cell.cosine.mean, 6) << "\n";
    }
    write_file(directory + "/pipeline_comparison.csv", csv.str());
    write_file(directory + "/pipeline_comparison.svg", boxplot_svg(report));
}

}  // namespace polybite
