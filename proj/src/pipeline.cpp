#include "msad/pipeline.hpp"

#include "msad/dataset.hpp"
#include "msad/image.hpp"
#include "msad/parallel.hpp"
#include "msad/point_cloud.hpp"
#include "msad/score_map.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace msad {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string mode_name(FeatureMode m) { return m == FeatureMode::Import ? "import" : "handcrafted"; }

FeatureMode parse_mode(const std::string& s) {
    if (s == "handcrafted") return FeatureMode::Handcrafted;
    if (s == "import") return FeatureMode::Import;
    throw ParameterError("unknown feature mode '" + s + "' (expected handcrafted or import)");
}

json read_json(const fs::path& path, std::string_view what) {
    std::ifstream in(path);
    if (!in) throw DataError(std::string(what) + " not found: " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

class Stopwatch {
public:
    void lap(const std::string& name) {
        auto now = std::chrono::steady_clock::now();
        timings_[name] = std::chrono::duration<double>(now - last_).count();
        last_ = now;
    }
    const json& timings() const { return timings_; }

private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
    json timings_ = json::object();
};

void write_manifest(const RunConfig& config, std::string_view command, const Stopwatch& watch, json extra = {}) {
    OutputLayout layout{config.out};
    json doc = {{"command", command},
                {"version", kVersion},
                {"config_hash", config_hash(config)},
                {"config", run_config_to_json(config)},
                {"workers", worker_count()},
                {"timings_s", watch.timings()}};
    if (!extra.is_null()) doc["outputs"] = std::move(extra);
    write_json(layout.manifest_file(command), doc);
}

std::vector<const SampleRef*> all_refs(const CategoryIndex& cat) {
    std::vector<const SampleRef*> refs;
    for (const auto& r : cat.train) refs.push_back(&r);
    for (const auto& t : cat.test) refs.push_back(&t.ref);
    return refs;
}

fs::path split_subdir(const SampleRef& ref) {
    return ref.split == Split::Train ? fs::path("train") : fs::path("test") / ref.defect;
}

}  // namespace

void RunConfig::validate() const {
    if (modalities.empty()) throw ParameterError("modality subset must not be empty");
    if (image.working_resolution < 1 || image.grid_rows < 1 || image.grid_cols < 1)
        throw ParameterError("image resolution and grid must be positive");
    if (image.grid_rows > image.working_resolution || image.grid_cols > image.working_resolution)
        throw ParameterError("image grid exceeds the working resolution");
    if (k_normals < 3) throw ParameterError("k_normals must be at least 3");
    if (k_fpfh < 1) throw ParameterError("k_fpfh must be at least 1");
    if (!(coreset_ratio > 0.0) || coreset_ratio > 1.0) throw ParameterError("coreset ratio must lie in (0, 1]");
    if (!(gating.nu > 0.0) || gating.nu > 1.0) throw ParameterError("gating nu must lie in (0, 1]");
    if (gating.gamma && !(*gating.gamma > 0.0)) throw ParameterError("gating gamma must be positive");
    if (!(map_sigma >= 0.0)) throw ParameterError("map sigma must be non-negative");
    for (auto m : modalities.members())
        if (mode(m) == FeatureMode::Import && import_root.empty())
            throw ParameterError(std::string(modality_name(m)) + " features are imported but import_root is not set");
}

json run_config_to_json(const RunConfig& c) {
    json mods = json::array();
    for (auto m : c.modalities.members()) mods.push_back(std::string(modality_short_name(m)));
    json modes = json::object();
    for (auto m : kAllModalities) modes[std::string(modality_short_name(m))] = mode_name(c.mode(m));
    json gating = {{"nu", c.gating.nu}, {"kernel", std::string(kernel_name(c.gating.kernel))}, {"tolerance", c.gating.tolerance}};
    gating["gamma"] = c.gating.gamma ? json(*c.gating.gamma) : json(nullptr);
    return {{"dataset", c.dataset.string()},
            {"out", c.out.string()},
            {"modalities", mods},
            {"categories", c.categories},
            {"features", modes},
            {"import_root", c.import_root.string()},
            {"gt_dir", c.gt_dir},
            {"image", {{"resolution", c.image.working_resolution}, {"grid", {c.image.grid_rows, c.image.grid_cols}}}},
            {"fpfh", {{"k_normals", c.k_normals}, {"k_fpfh", c.k_fpfh}}},
            {"coreset_ratio", c.coreset_ratio},
            {"seed", c.seed},
            {"fusion", c.gated ? std::string("gate") : std::string(fusion_rule_name(c.rule))},
            {"gating", gating},
            {"map_sigma", c.map_sigma},
            {"export_maps", c.export_maps},
            {"localization", c.localization},
            {"synth", synth::config_to_json(c.synth)}};
}

RunConfig run_config_from_json(const json& doc) {
    RunConfig c;
    try {
        c.dataset = doc.value("dataset", c.dataset.string());
        c.out = doc.value("out", c.out.string());
        if (doc.contains("modalities")) {
            std::vector<Modality> mods;
            for (const auto& m : doc.at("modalities")) mods.push_back(parse_modality(m.get<std::string>()));
            c.modalities = ModalitySubset(mods);
        }
        c.categories = doc.value("categories", c.categories);
        if (doc.contains("features"))
            for (const auto& [k, v] : doc.at("features").items())
                c.feature_mode[static_cast<int>(parse_modality(k))] = parse_mode(v.get<std::string>());
        c.import_root = doc.value("import_root", std::string());
        c.gt_dir = doc.value("gt_dir", c.gt_dir);
        if (doc.contains("image")) {
            const auto& im = doc.at("image");
            c.image.working_resolution = im.value("resolution", c.image.working_resolution);
            if (im.contains("grid")) {
                c.image.grid_rows = im.at("grid").at(0).get<int>();
                c.image.grid_cols = im.at("grid").at(1).get<int>();
            }
        }
        if (doc.contains("fpfh")) {
            c.k_normals = doc.at("fpfh").value("k_normals", c.k_normals);
            c.k_fpfh = doc.at("fpfh").value("k_fpfh", c.k_fpfh);
        }
        c.coreset_ratio = doc.value("coreset_ratio", c.coreset_ratio);
        c.seed = doc.value("seed", c.seed);
        if (doc.contains("fusion")) {
            auto f = doc.at("fusion").get<std::string>();
            c.gated = f == "gate";
            if (!c.gated) c.rule = parse_fusion_rule(f);
        }
        if (doc.contains("gating")) {
            const auto& g = doc.at("gating");
            c.gating.nu = g.value("nu", c.gating.nu);
            c.gating.tolerance = g.value("tolerance", c.gating.tolerance);
            if (g.contains("kernel")) c.gating.kernel = parse_kernel(g.at("kernel").get<std::string>());
            if (g.contains("gamma") && !g.at("gamma").is_null()) c.gating.gamma = g.at("gamma").get<double>();
        }
        c.map_sigma = doc.value("map_sigma", c.map_sigma);
        c.export_maps = doc.value("export_maps", c.export_maps);
        c.localization = doc.value("localization", c.localization);
        if (doc.contains("synth")) c.synth = synth::config_from_json(doc.at("synth"));
    } catch (const json::exception& e) {
        throw ParameterError(std::string("malformed run config: ") + e.what());
    }
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("config file not found: " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ParameterError("malformed config " + path.string() + ": " + e.what());
    }
    return run_config_from_json(doc);
}

std::string config_hash(const RunConfig& config) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char ch : run_config_to_json(config).dump()) {
        h ^= ch;
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

fs::path OutputLayout::feature_file(const SampleRef& ref, Modality m) const {
    return root / "features" / ref.category / std::string(modality_name(m)) / split_subdir(ref) / (ref.id + ".msft");
}
fs::path OutputLayout::bank_file(const std::string& category, Modality m) const {
    return root / "banks" / category / (std::string(modality_name(m)) + ".msbk");
}
fs::path OutputLayout::training_scores_file(const std::string& category, Modality m) const {
    return root / "banks" / category / (std::string(modality_name(m)) + ".training.json");
}
fs::path OutputLayout::score_file(const std::string& category, Modality m) const {
    return root / "scores" / category / (std::string(modality_name(m)) + ".json");
}
fs::path OutputLayout::map_file(const SampleRef& ref, Modality m) const {
    auto ext = is_image_modality(m) ? ".pgm" : ".txt";
    return root / "maps" / ref.category / std::string(modality_name(m)) / ref.defect / (ref.id + ext);
}
fs::path OutputLayout::gate_file(const std::string& category, ModalitySubset subset) const {
    return root / "gates" / category / (subset.label() + ".json");
}
fs::path OutputLayout::manifest_file(std::string_view command) const {
    return root / "manifests" / (std::string(command) + ".json");
}

DatasetIndex scan_for(const RunConfig& config) {
    ScanOptions opts;
    opts.modalities = config.modalities;
    opts.gt_dir = config.gt_dir;
    opts.categories = config.categories;
    return scan_dataset(config.dataset, opts);
}

synth::Manifest cmd_synth(const RunConfig& config) {
    Stopwatch watch;
    auto manifest = synth::generate_dataset(config.synth, config.dataset);
    watch.lap("generate");
    write_manifest(config, "synth", watch, {{"dataset", config.dataset.string()}, {"samples", manifest.samples.size()}});
    return manifest;
}

IcpResult cmd_align(const fs::path& src, const fs::path& dst, const std::optional<fs::path>& init,
                    const AlignParams& params, const fs::path& out_dir) {
    auto a = load_point_cloud(src);
    auto b = load_point_cloud(dst);
    RigidTransform start = init ? load_transform(*init) : RigidTransform::identity();
    auto result = icp_align(a.points, b.points, start, params.icp);
    fs::create_directories(out_dir);
    save_transform(result.transform, out_dir / "transform.txt");
    PointCloudData aligned{result.transform.apply(a.points), std::nullopt};
    save_point_cloud_xyz(aligned, out_dir / "aligned.xyz");
    // Merged cloud: the target scan completed by the registered source.
    PointCloudData merged{merge_scans(b.points, a.points, result.transform, params.dedup_radius), std::nullopt};
    save_point_cloud_xyz(merged, out_dir / "merged.xyz");
    write_json(out_dir / "icp.json", {{"rmse", result.rmse},
                                      {"iterations", result.iterations},
                                      {"converged", result.converged},
                                      {"rotation_deg", result.transform.angle() * 180.0 / 3.14159265358979323846},
                                      {"rmse_trace", result.rmse_trace},
                                      {"merged_points", merged.size()}});
    if (!result.converged)
        spdlog::warn("align: ICP stopped after {} iterations without converging (rmse {})", result.iterations,
                     result.rmse);
    return result;
}

void cmd_extract(const RunConfig& config) {
    config.validate();
    Stopwatch watch;
    auto index = scan_for(config);
    watch.lap("scan");
    OutputLayout layout{config.out};
    FpfhOptions fpfh{config.k_normals, config.k_fpfh, std::nullopt};
    std::size_t written = 0;
    for (const auto& cat : index.categories) {
        auto refs = all_refs(cat);
        for (auto m : config.modalities.members()) {
            for (const auto* ref : refs) fs::create_directories(layout.feature_file(*ref, m).parent_path());
            parallel_for(refs.size(), [&](std::size_t i) {
                const SampleRef& ref = *refs[i];
                const auto& path = ref.path(m);
                PatchFeatureMap map;
                try {
                    if (config.mode(m) == FeatureMode::Import) {
                        auto src = config.import_root / ref.category / std::string(modality_name(m)) / split_subdir(ref) /
                                   (ref.id + ".msft");
                        map = read_feature_matrix(src);
                        if (map.modality != m) throw DataError("imported features have the wrong modality");
                    } else if (is_image_modality(m)) {
                        map = extract_patch_features(load_image(*path), m, config.image);
                    } else {
                        map = compute_fpfh(load_point_cloud(*path).points, fpfh);
                    }
                } catch (const Error& e) {
                    throw DataError(ref.category + "/" + std::string(modality_name(m)) + "/" + ref.key() + ": " +
                                    e.what());
                }
                write_feature_matrix(map, layout.feature_file(ref, m));
            });
            written += refs.size();
        }
        spdlog::info("extract: {} done", cat.name);
    }
    watch.lap("extract");
    write_manifest(config, "extract", watch, {{"feature_files", written}});
}

void cmd_build_bank(const RunConfig& config) {
    config.validate();
    Stopwatch watch;
    auto index = scan_for(config);
    OutputLayout layout{config.out};
    for (const auto& cat : index.categories) {
        for (auto m : config.modalities.members()) {
            std::vector<PatchFeatureMap> training(cat.train.size());
            for (std::size_t i = 0; i < cat.train.size(); ++i) {
                auto path = layout.feature_file(cat.train[i], m);
                if (!fs::exists(path)) throw DataError("features not found: " + path.string() + " (run extract first)");
                training[i] = read_feature_matrix(path);
            }
            auto build = build_bank(training, {config.coreset_ratio, config.seed});
            fs::create_directories(layout.bank_file(cat.name, m).parent_path());
            save_bank(build.bank, layout.bank_file(cat.name, m));
            json keys = json::array(), raw = json::array(), normalized = json::array();
            for (std::size_t i = 0; i < build.training_scores.size(); ++i) {
                keys.push_back(cat.train[i].key());
                raw.push_back(build.training_scores[i]);
                normalized.push_back(build.bank.scaler.normalize(build.training_scores[i]));
            }
            write_json(layout.training_scores_file(cat.name, m),
                       {{"keys", keys}, {"raw", raw}, {"normalized", normalized}});
            spdlog::info("build-bank: {}/{}: {} of {} vectors kept", cat.name, modality_name(m), build.bank.size(),
                         build.bank.source_vectors);
        }
    }
    watch.lap("build");
    write_manifest(config, "build-bank", watch);
}

void cmd_score(const RunConfig& config) {
    config.validate();
    Stopwatch watch;
    auto index = scan_for(config);
    OutputLayout layout{config.out};
    for (const auto& cat : index.categories) {
        for (auto m : config.modalities.members()) {
            auto bank = load_bank(layout.bank_file(cat.name, m));
            if (bank.modality != m) throw DataError("bank " + layout.bank_file(cat.name, m).string() + " has the wrong modality");
            std::vector<std::pair<std::string, SampleScore>> results(cat.test.size());
            for (const auto& t : cat.test)
                if (config.export_maps) fs::create_directories(layout.map_file(t.ref, m).parent_path());
            parallel_for(cat.test.size(), [&](std::size_t i) {
                const SampleRef& ref = cat.test[i].ref;
                auto fpath = layout.feature_file(ref, m);
                if (!fs::exists(fpath)) throw DataError("features not found: " + fpath.string() + " (run extract first)");
                auto features = read_feature_matrix(fpath);
                auto r = score_sample(bank, features);
                SampleScore s;
                s.raw = r.object_score;
                s.normalized = r.normalized_score;
                s.local = std::move(r.patch_scores);
                if (is_image_modality(m)) {
                    s.grid_rows = static_cast<int>(features.grid_rows);
                    s.grid_cols = static_cast<int>(features.grid_cols);
                    auto image = load_image(*ref.path(m));
                    s.width = image.width;
                    s.height = image.height;
                    if (config.export_maps) {
                        auto map = render_score_map(s.local, s.grid_rows, s.grid_cols, s.width, s.height, config.map_sigma);
                        export_score_map(map, s.width, s.height, layout.map_file(ref, m));
                    }
                } else if (config.export_maps) {
                    export_point_scores(s.local, layout.map_file(ref, m));
                }
                results[i] = {ref.key(), std::move(s)};
            });
            SampleScoreTable table(std::make_move_iterator(results.begin()), std::make_move_iterator(results.end()));
            write_json(layout.score_file(cat.name, m), score_table_to_json(table));
        }
        spdlog::info("score: {} done", cat.name);
    }
    watch.lap("score");
    write_manifest(config, "score", watch);
}

void cmd_fit_gate(const RunConfig& config) {
    config.validate();
    Stopwatch watch;
    auto index = scan_for(config);
    OutputLayout layout{config.out};
    std::size_t fitted = 0;
    for (const auto& cat : index.categories) {
        std::map<Modality, ScoreTable> tables;
        std::map<Modality, RobustScaler> scalers;
        for (auto m : config.modalities.members()) {
            auto doc = read_json(layout.training_scores_file(cat.name, m), "training scores");
            auto keys = doc.at("keys").get<std::vector<std::string>>();
            auto normalized = doc.at("normalized").get<std::vector<double>>();
            for (std::size_t i = 0; i < keys.size(); ++i) tables[m][keys[i]] = normalized[i];
            scalers[m] = load_bank(layout.bank_file(cat.name, m)).scaler;
        }
        for (auto subset : config.modalities.nonempty_subsets()) {
            if (subset.size() < 2) continue;
            auto assembled = assemble_score_vectors(tables, subset);
            auto model = fit_gating(assembled.vectors, subset, config.gating);
            for (auto m : subset.members())
                model.scalers.push_back({m, scalers[m].median, scalers[m].iqr, scalers[m].degenerate});
            write_json(layout.gate_file(cat.name, subset), gating_to_json(model));
            spdlog::info("fit-gate: {}/{}: {} support vectors, rho {:.6g}", cat.name, subset.label(),
                         model.support_vectors.size(), model.rho);
            ++fitted;
        }
    }
    watch.lap("fit");
    write_manifest(config, "fit-gate", watch, {{"models", fitted}});
}

CategoryArtifacts load_category_artifacts(const RunConfig& config, const std::string& category, bool with_gates) {
    OutputLayout layout{config.out};
    CategoryArtifacts art;
    art.name = category;
    for (auto m : config.modalities.members())
        art.scores[m] = score_table_from_json(read_json(layout.score_file(category, m), "scores"));
    if (with_gates)
        for (auto subset : config.modalities.nonempty_subsets())
            if (subset.size() > 1)
                art.gates[subset.label()] = gating_from_json(read_json(layout.gate_file(category, subset), "gating model"));
    return art;
}

EvalReport cmd_evaluate(const RunConfig& config) {
    config.validate();
    Stopwatch watch;
    auto index = scan_for(config);
    std::vector<CategoryArtifacts> artifacts;
    for (const auto& cat : index.categories) artifacts.push_back(load_category_artifacts(config, cat.name, config.gated));
    watch.lap("load");
    auto report = evaluate(index, artifacts, standard_configs(config.modalities, config.gated, config.rule),
                           {config.map_sigma, config.localization});
    watch.lap("evaluate");
    OutputLayout layout{config.out};
    write_json(layout.report_dir() / "report.json", report_to_json(report));
    write_text(layout.report_dir() / "report.txt", report_to_text(report));
    write_text(layout.report_dir() / "report.csv", report_to_csv(report));
    write_manifest(config, "evaluate", watch);
    return report;
}

std::string cmd_report(const fs::path& results_dir) {
    OutputLayout layout{results_dir};
    auto report = report_from_json(read_json(layout.report_dir() / "report.json", "report"));
    auto text = report_to_text(report);
    write_text(layout.report_dir() / "report.txt", text);
    write_text(layout.report_dir() / "report.csv", report_to_csv(report));
    return text;
}

}  // namespace msad
