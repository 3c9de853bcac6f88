#include "msad/evaluation.hpp"

#include "msad/image.hpp"
#include "msad/metrics.hpp"
#include "msad/parallel.hpp"
#include "msad/point_cloud.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace msad {

using nlohmann::json;

nlohmann::json score_table_to_json(const SampleScoreTable& table) {
    json samples = json::object();
    for (const auto& [key, s] : table) {
        json entry = {{"raw", s.raw}, {"normalized", s.normalized}, {"local", s.local}};
        if (s.grid_rows > 0) {
            entry["grid"] = {s.grid_rows, s.grid_cols};
            entry["size"] = {s.width, s.height};
        }
        samples[key] = std::move(entry);
    }
    return {{"samples", samples}};
}

SampleScoreTable score_table_from_json(const nlohmann::json& doc) {
    SampleScoreTable table;
    try {
        for (const auto& [key, e] : doc.at("samples").items()) {
            SampleScore s;
            s.raw = e.at("raw").get<double>();
            s.normalized = e.at("normalized").get<double>();
            s.local = e.at("local").get<std::vector<double>>();
            if (e.contains("grid")) {
                s.grid_rows = e.at("grid").at(0).get<int>();
                s.grid_cols = e.at("grid").at(1).get<int>();
                s.width = e.at("size").at(0).get<int>();
                s.height = e.at("size").at(1).get<int>();
                if (static_cast<std::size_t>(s.grid_rows) * s.grid_cols != s.local.size())
                    throw DataError("score table: grid of '" + key + "' does not match its patch scores");
            }
            table.emplace(key, std::move(s));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed score table: ") + e.what());
    }
    return table;
}

std::vector<FusionConfig> standard_configs(ModalitySubset available, bool gated, FusionRule rule) {
    std::vector<FusionConfig> out;
    for (auto s : available.nonempty_subsets()) out.push_back({s, gated, rule});
    return out;
}

KeyedScores object_scores(const CategoryArtifacts& artifacts, const FusionConfig& config) {
    std::map<Modality, ScoreTable> tables;
    for (auto m : config.subset.members()) {
        auto it = artifacts.scores.find(m);
        if (it == artifacts.scores.end())
            throw DataError(artifacts.name + ": no " + std::string(modality_name(m)) + " scores");
        auto& t = tables[m];
        for (const auto& [k, s] : it->second) t[k] = s.normalized;
    }
    auto assembled = assemble_score_vectors(tables, config.subset);

    KeyedScores out;
    out.keys = std::move(assembled.keys);
    out.scores.reserve(out.keys.size());
    const GatingModel* gate = nullptr;
    if (config.subset.size() > 1 && config.gated) {
        auto it = artifacts.gates.find(config.label());
        if (it == artifacts.gates.end())
            throw DataError(artifacts.name + ": gating model for " + config.label() + " not found");
        gate = &it->second;
    }
    for (const auto& v : assembled.vectors) {
        if (v.size() == 1)
            out.scores.push_back(v.front());
        else if (gate)
            out.scores.push_back(gate_score(*gate, v));
        else
            out.scores.push_back(rule_fuse(v, config.rule));
    }
    return out;
}

namespace {

std::optional<LocalizationMetrics> localize(const CategoryIndex& cat, const SampleScoreTable& table, Modality m,
                                            double sigma) {
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
    LocalizationMetrics out;
    for (const auto& sample : cat.test) {
        if (!sample.ref.has(m)) continue;
        const std::string key = sample.ref.key();
        auto it = table.find(key);
        if (it == table.end())
            throw DataError(cat.name + "/" + key + ": missing " + std::string(modality_name(m)) + " scores");
        const SampleScore& s = it->second;
        const auto& gt = sample.gt(m);
        if (is_image_modality(m)) {
            if (s.grid_rows <= 0 || s.width <= 0)
                throw DataError(cat.name + "/" + key + ": image scores lack grid or size information");
            auto map = render_score_map(s.local, s.grid_rows, s.grid_cols, s.width, s.height, sigma);
            scores.insert(scores.end(), map.begin(), map.end());
            if (gt) {
                auto mask = load_mask(*gt, std::make_pair(s.width, s.height));
                for (auto v : mask.pixels) labels.push_back(v ? 1 : 0);
            } else {
                labels.insert(labels.end(), map.size(), 0);
            }
        } else {
            scores.insert(scores.end(), s.local.begin(), s.local.end());
            if (gt) {
                auto l = load_point_labels(*gt, s.local.size());
                labels.insert(labels.end(), l.begin(), l.end());
            } else {
                labels.insert(labels.end(), s.local.size(), 0);
            }
        }
        ++out.samples;
    }
    auto positives = std::count(labels.begin(), labels.end(), 1);
    if (positives == 0 || positives == static_cast<long>(labels.size())) return std::nullopt;
    LabeledScores data{scores, labels};
    out.auroc = auroc(data);
    out.f1_max = f1_max(data);
    out.aupr = aupr(data);
    out.elements = scores.size();
    return out;
}

}  // namespace

EvalReport evaluate(const DatasetIndex& index, const std::vector<CategoryArtifacts>& artifacts,
                    const std::vector<FusionConfig>& configs, const EvalOptions& options) {
    if (configs.empty()) throw ParameterError("evaluate: no fusion configurations given");
    if (artifacts.empty()) throw DataError("evaluate: no category artifacts");
    EvalReport report;
    for (const auto& c : configs) report.configs.push_back(c.label());
    std::set<Modality> used;
    for (const auto& a : artifacts)
        for (const auto& [m, t] : a.scores) used.insert(m);
    report.modalities.assign(used.begin(), used.end());
    report.rows.resize(artifacts.size());

    parallel_for(artifacts.size(), [&](std::size_t ci) {
        const auto& art = artifacts[ci];
        const auto& cat = index.category(art.name);
        CategoryRow& row = report.rows[ci];
        row.category = art.name;

        std::map<std::string, std::uint8_t> object_label;
        for (const auto& s : cat.test)
            object_label[s.ref.key()] = derive_object_label(modality_labels(s)) == ObjectLabel::Anomalous ? 1 : 0;

        for (const auto& config : configs) {
            auto keyed = object_scores(art, config);
            if (keyed.keys.size() != object_label.size())
                throw DataError(art.name + ": " + config.label() + " scores cover " + std::to_string(keyed.keys.size()) +
                                " of " + std::to_string(object_label.size()) + " test samples");
            std::vector<std::uint8_t> labels;
            for (const auto& k : keyed.keys) {
                auto it = object_label.find(k);
                if (it == object_label.end()) throw DataError(art.name + ": scored sample '" + k + "' is not in the dataset");
                labels.push_back(it->second);
            }
            row.object_auroc[config.label()] = auroc({keyed.scores, labels});
        }
        if (options.localization)
            for (const auto& [m, table] : art.scores)
                if (auto metrics = localize(cat, table, m, options.map_sigma)) row.localization[m] = *metrics;
    });

    report.mean.category = "mean";
    for (const auto& label : report.configs) {
        double sum = 0.0;
        for (const auto& r : report.rows) sum += r.object_auroc.at(label);
        report.mean.object_auroc[label] = sum / static_cast<double>(report.rows.size());
    }
    for (auto m : report.modalities) {
        LocalizationMetrics acc;
        std::size_t n = 0;
        for (const auto& r : report.rows) {
            auto it = r.localization.find(m);
            if (it == r.localization.end()) continue;
            acc.auroc += it->second.auroc;
            acc.f1_max += it->second.f1_max;
            acc.aupr += it->second.aupr;
            acc.samples += it->second.samples;
            acc.elements += it->second.elements;
            ++n;
        }
        if (n == 0) continue;
        acc.auroc /= static_cast<double>(n);
        acc.f1_max /= static_cast<double>(n);
        acc.aupr /= static_cast<double>(n);
        report.mean.localization[m] = acc;
    }
    return report;
}

namespace {

json row_to_json(const CategoryRow& row) {
    json loc = json::object();
    for (const auto& [m, l] : row.localization)
        loc[std::string(modality_name(m))] = {
            {"auroc", l.auroc}, {"f1_max", l.f1_max}, {"aupr", l.aupr}, {"samples", l.samples}, {"elements", l.elements}};
    return {{"category", row.category}, {"object_auroc", row.object_auroc}, {"localization", loc}};
}

CategoryRow row_from_json(const json& doc) {
    CategoryRow row;
    row.category = doc.at("category").get<std::string>();
    row.object_auroc = doc.at("object_auroc").get<std::map<std::string, double>>();
    for (const auto& [m, l] : doc.at("localization").items())
        row.localization[parse_modality(m)] = {l.at("auroc").get<double>(), l.at("f1_max").get<double>(),
                                               l.at("aupr").get<double>(), l.at("samples").get<std::size_t>(),
                                               l.at("elements").get<std::size_t>()};
    return row;
}

std::string fixed3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

}  // namespace

nlohmann::json report_to_json(const EvalReport& report) {
    json rows = json::array();
    for (const auto& r : report.rows) rows.push_back(row_to_json(r));
    json mods = json::array();
    for (auto m : report.modalities) mods.push_back(std::string(modality_name(m)));
    return {{"configs", report.configs}, {"modalities", mods}, {"categories", rows}, {"mean", row_to_json(report.mean)}};
}

EvalReport report_from_json(const nlohmann::json& doc) {
    try {
        EvalReport report;
        report.configs = doc.at("configs").get<std::vector<std::string>>();
        for (const auto& m : doc.at("modalities")) report.modalities.push_back(parse_modality(m.get<std::string>()));
        for (const auto& r : doc.at("categories")) report.rows.push_back(row_from_json(r));
        report.mean = row_from_json(doc.at("mean"));
        return report;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed report: ") + e.what());
    }
}

std::string report_to_text(const EvalReport& report) {
    std::vector<const CategoryRow*> rows;
    for (const auto& r : report.rows) rows.push_back(&r);
    rows.push_back(&report.mean);
    std::size_t first = 8;
    for (const auto* r : rows) first = std::max(first, r->category.size());

    std::ostringstream out;
    auto cell = [&](const std::string& text, std::size_t width) {
        out << std::string(width > text.size() ? width - text.size() : 0, ' ') << text;
    };
    out << "Object-level AUROC\n";
    out << std::string(first, ' ');
    std::vector<std::size_t> widths;
    for (const auto& c : report.configs) {
        widths.push_back(std::max<std::size_t>(c.size(), 5) + 2);
        cell(c, widths.back());
    }
    out << '\n';
    for (const auto* r : rows) {
        out << r->category << std::string(first - r->category.size(), ' ');
        for (std::size_t i = 0; i < report.configs.size(); ++i) {
            auto it = r->object_auroc.find(report.configs[i]);
            cell(it == r->object_auroc.end() ? "-" : fixed3(it->second), widths[i]);
        }
        out << '\n';
    }

    if (std::any_of(rows.begin(), rows.end(), [](const CategoryRow* r) { return !r->localization.empty(); })) {
        out << "\nLocalization (pixel-level for images, point-level for clouds): AUROC / F1-max / AUPR\n";
        out << std::string(first, ' ');
        for (auto m : report.modalities) cell(std::string(modality_name(m)), 22);
        out << '\n';
        for (const auto* r : rows) {
            out << r->category << std::string(first - r->category.size(), ' ');
            for (auto m : report.modalities) {
                auto it = r->localization.find(m);
                cell(it == r->localization.end()
                         ? "-"
                         : fixed3(it->second.auroc) + " " + fixed3(it->second.f1_max) + " " + fixed3(it->second.aupr),
                     22);
            }
            out << '\n';
        }
    }
    return out.str();
}

std::string report_to_csv(const EvalReport& report) {
    std::ostringstream out;
    out.precision(17);
    out << "category,metric,target,value\n";
    std::vector<const CategoryRow*> rows;
    for (const auto& r : report.rows) rows.push_back(&r);
    rows.push_back(&report.mean);
    for (const auto* r : rows) {
        for (const auto& c : report.configs)
            if (auto it = r->object_auroc.find(c); it != r->object_auroc.end())
                out << r->category << ",object_auroc," << c << ',' << it->second << '\n';
        for (const auto& [m, l] : r->localization) {
            auto name = modality_name(m);
            out << r->category << ",local_auroc," << name << ',' << l.auroc << '\n';
            out << r->category << ",local_f1_max," << name << ',' << l.f1_max << '\n';
            out << r->category << ",local_aupr," << name << ',' << l.aupr << '\n';
        }
    }
    return out.str();
}

}  // namespace msad
