// msad: command-line driver for the multi-sensor anomaly detection pipeline.
//
// Exit codes: 0 success, 1 usage or parameter error, 2 data error.

#include "msad/parallel.hpp"
#include "msad/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>

namespace {

struct Overrides {
    std::string config;
    std::string dataset;
    std::string out;
    std::string modalities;
    std::string fusion;
    std::optional<double> coreset_ratio;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    bool verbose = false;
};

msad::RunConfig resolve(const Overrides& o) {
    msad::RunConfig c = o.config.empty() ? msad::RunConfig{} : msad::load_run_config(o.config);
    if (!o.dataset.empty()) c.dataset = o.dataset;
    if (!o.out.empty()) c.out = o.out;
    if (!o.modalities.empty()) c.modalities = msad::ModalitySubset(msad::parse_modality_list(o.modalities));
    if (!o.fusion.empty()) {
        c.gated = o.fusion == "gate";
        if (!c.gated) c.rule = msad::parse_fusion_rule(o.fusion);
    }
    if (o.coreset_ratio) c.coreset_ratio = *o.coreset_ratio;
    if (o.seed) {
        c.seed = *o.seed;
        c.synth.seed = *o.seed;
    }
    c.validate();
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("msad"));

    CLI::App app{"Multi-sensor (RGB, infrared, point cloud) anomaly detection pipeline"};
    app.require_subcommand(1);
    Overrides o;
    app.add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--dataset", o.dataset, "Dataset root (overrides the config)");
    app.add_option("--out", o.out, "Output directory (overrides the config)");
    app.add_option("--modalities", o.modalities, "Comma separated subset of rgb,ir,pc");
    app.add_option("--fusion", o.fusion, "gate, max or mean")->check(CLI::IsMember({"gate", "max", "mean"}));
    app.add_option("--coreset-ratio", o.coreset_ratio, "Memory bank coreset ratio in (0, 1]");
    app.add_option("--seed", o.seed, "Seed for coreset selection and synthetic data");
    app.add_option("--workers", o.workers, "Worker threads (default: MSAD_WORKERS or all cores)");
    app.add_flag("-v,--verbose", o.verbose, "Debug logging");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset at the dataset root");
    auto* extract = app.add_subcommand("extract", "Extract per-sample features");
    auto* build = app.add_subcommand("build-bank", "Build coreset memory banks from training features");
    auto* score = app.add_subcommand("score", "Score test samples against the memory banks");
    auto* gate = app.add_subcommand("fit-gate", "Fit decision gating models on training scores");
    auto* eval = app.add_subcommand("evaluate", "Compute the evaluation report");
    auto* run = app.add_subcommand("run", "extract, build-bank, score, fit-gate and evaluate in sequence");

    auto* report = app.add_subcommand("report", "Re-render the text and CSV report from report.json");
    std::string results_dir;
    report->add_option("results", results_dir, "Results directory (default: --out)");

    auto* align = app.add_subcommand("align", "Register one point cloud onto another with ICP");
    std::string src, dst, init, align_out = "align";
    msad::AlignParams params;
    align->add_option("source", src, "Cloud to move")->required()->check(CLI::ExistingFile);
    align->add_option("target", dst, "Reference cloud")->required()->check(CLI::ExistingFile);
    align->add_option("--init", init, "Initial transform (12 numbers)")->check(CLI::ExistingFile);
    align->add_option("--max-iter", params.icp.max_iterations, "Iteration limit")->check(CLI::PositiveNumber);
    align->add_option("--tol", params.icp.tolerance, "RMSE improvement threshold (mm)")->check(CLI::NonNegativeNumber);
    align->add_option("--dedup-radius", params.dedup_radius, "Merge radius (mm)")->check(CLI::NonNegativeNumber);
    align->add_option("--align-out", align_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }
    if (o.verbose) spdlog::set_level(spdlog::level::debug);
    if (o.workers) msad::set_worker_count(*o.workers);

    try {
        if (align->parsed()) {
            auto r = msad::cmd_align(src, dst, init.empty() ? std::nullopt : std::optional<std::filesystem::path>(init),
                                     params, align_out);
            spdlog::info("align: rmse {:.6g} after {} iterations", r.rmse, r.iterations);
            return 0;
        }
        if (report->parsed()) {
            std::filesystem::path dir = results_dir.empty() ? resolve(o).out : std::filesystem::path(results_dir);
            std::cout << msad::cmd_report(dir);
            return 0;
        }
        auto config = resolve(o);
        if (synth->parsed()) msad::cmd_synth(config);
        if (extract->parsed() || run->parsed()) msad::cmd_extract(config);
        if (build->parsed() || run->parsed()) msad::cmd_build_bank(config);
        if (score->parsed() || run->parsed()) msad::cmd_score(config);
        if ((gate->parsed() || run->parsed()) && config.gated) msad::cmd_fit_gate(config);
        if (gate->parsed() && !config.gated) spdlog::warn("fit-gate: fusion rule is '{}', nothing to fit",
                                                          msad::fusion_rule_name(config.rule));
        if (eval->parsed() || run->parsed()) {
            auto r = msad::cmd_evaluate(config);
            std::cerr << msad::report_to_text(r);
        }
        return 0;
    } catch (const msad::ParameterError& e) {
        spdlog::error("{}", e.what());
        return 1;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 2;
    }
}
