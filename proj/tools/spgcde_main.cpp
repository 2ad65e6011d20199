// Command-line front end: synthesize data, train, evaluate, sweep presets,
// and predict single cases.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spgcde/spgcde.hpp"

namespace fs = std::filesystem;

namespace {

void print_line(const std::string& s) { std::printf("%s\n", s.c_str()); }

spgcde::SynthSpec synth_spec_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw spgcde::BadSpec(std::string("unparseable synth spec: ") + e.what());
    }
    spgcde::detail::check_keys(j,
                               {"num_cases", "height", "width", "num_classes", "contrast_gap",
                                "seed", "split_cycle", "with_priors", "prior_dilate",
                                "noise_sigma"},
                               "synth spec");
    spgcde::SynthSpec s;
    s.num_cases = spgcde::detail::field(j, "num_cases", s.num_cases);
    s.h = spgcde::detail::field(j, "height", s.h);
    s.w = spgcde::detail::field(j, "width", s.w);
    s.num_classes = spgcde::detail::field(j, "num_classes", s.num_classes);
    s.contrast_gap = spgcde::detail::field(j, "contrast_gap", s.contrast_gap);
    s.seed = spgcde::detail::field(j, "seed", s.seed);
    s.split_cycle = spgcde::detail::field(j, "split_cycle", s.split_cycle);
    s.with_priors = spgcde::detail::field(j, "with_priors", s.with_priors);
    s.prior_dilate = spgcde::detail::field(j, "prior_dilate", s.prior_dilate);
    s.noise_sigma = spgcde::detail::field(j, "noise_sigma", s.noise_sigma);
    return s;
}

spgcde::HarnessConfig load_config(const std::string& path) {
    if (path.empty()) return spgcde::HarnessConfig{};
    return spgcde::HarnessConfig::from_json_text(spgcde::read_file_text(path));
}

void apply_preset(spgcde::HarnessConfig& cfg, const std::string& preset) {
    if (preset.empty()) return;
    auto ab = spgcde::AblationConfig::preset(preset);
    if (ab.use_prior) ab.prior_source = cfg.ablation.prior_source;
    cfg.ablation = ab;
}

std::optional<spgcde::PriorSource> parse_source_opt(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return spgcde::parse_prior_source(s);
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    size_t start = 0;
    while (start <= s.size()) {
        const size_t comma = s.find(',', start);
        const std::string tok = s.substr(start, comma == std::string::npos ? std::string::npos
                                                                           : comma - start);
        if (!tok.empty()) out.push_back(tok);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

// `--image` may name the case directory, its meta.json, or its image.f32.
fs::path resolve_case_dir(const fs::path& image) {
    if (fs::is_directory(image)) return image;
    return image.parent_path();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-stage multi-organ segmentation workbench"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-synth", "write a synthetic case store");
    std::string gen_spec, gen_out;
    gen->add_option("--spec", gen_spec, "synth spec JSON file (defaults when omitted)");
    gen->add_option("--out", gen_out, "output store directory")->required();

    auto* train = app.add_subcommand("train", "fit a model on the train split");
    std::string tr_data, tr_config, tr_preset, tr_out;
    train->add_option("--data", tr_data, "case store directory")->required();
    train->add_option("--config", tr_config, "harness config JSON");
    train->add_option("--preset", tr_preset, "ablation preset (model1|model2|full|none|concat|cross_attention|sca)");
    train->add_option("--out", tr_out, "run directory")->required();

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    std::string ev_data, ev_ckpt, ev_report, ev_split = "test", ev_kind = "best", ev_source;
    eval->add_option("--data", ev_data, "case store directory")->required();
    eval->add_option("--ckpt", ev_ckpt, "run directory holding checkpoints")->required();
    eval->add_option("--report", ev_report, "write the JSON report here");
    eval->add_option("--split", ev_split, "split to score (default test)");
    eval->add_option("--kind", ev_kind, "checkpoint kind: best|last");
    eval->add_option("--prior-source", ev_source, "override prior source (files|builtin-unet-like|ground-truth-oracle)");

    auto* grid = app.add_subcommand("grid", "train and score a preset sweep");
    std::string gr_data, gr_config, gr_out, gr_presets = "model1,model2,full";
    grid->add_option("--data", gr_data, "case store directory")->required();
    grid->add_option("--config", gr_config, "harness config JSON");
    grid->add_option("--presets", gr_presets, "comma-separated preset names");
    grid->add_option("--out", gr_out, "sweep output directory")->required();

    auto* pred = app.add_subcommand("predict", "segment one stored case");
    std::string pr_image, pr_ckpt, pr_prior, pr_out, pr_kind = "best", pr_source;
    bool pr_overlay = false;
    pred->add_option("--image", pr_image, "case directory (or a file inside it)")->required();
    pred->add_option("--ckpt", pr_ckpt, "run directory holding checkpoints")->required();
    pred->add_option("--prior", pr_prior, "explicit prior.u8 file");
    pred->add_option("--out", pr_out, "artifact directory (default: the case directory)");
    pred->add_option("--kind", pr_kind, "checkpoint kind: best|last");
    pred->add_option("--prior-source", pr_source, "override prior source");
    pred->add_flag("--overlay", pr_overlay, "also write a color overlay PPM");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            spgcde::SynthSpec spec;
            if (!gen_spec.empty()) spec = synth_spec_from_json(spgcde::read_file_text(gen_spec));
            const auto cases = spgcde::generate_synthetic(spec);
            for (const auto& c : cases) spgcde::store_case(gen_out, c);
            std::printf("wrote %d cases to %s\n", static_cast<int>(cases.size()),
                        gen_out.c_str());
        } else if (train->parsed()) {
            spgcde::HarnessConfig cfg = load_config(tr_config);
            apply_preset(cfg, tr_preset);
            const auto res = spgcde::train_run(tr_data, cfg, tr_out, print_line);
            std::printf("done: %d epochs, %d steps, best val_dsc %s\n", res.epochs_run,
                        res.steps_run,
                        res.best_val_dsc < 0.0 ? "n/a"
                                               : spgcde::fmt_fixed(res.best_val_dsc, 6).c_str());
        } else if (eval->parsed()) {
            spgcde::EvalOptions opt;
            opt.split = ev_split;
            opt.ckpt_kind = ev_kind;
            opt.prior_override = parse_source_opt(ev_source);
            const auto rep = spgcde::evaluate_run(ev_data, ev_ckpt, opt, print_line);
            std::printf("%s", rep.to_table(ev_split).c_str());
            if (!ev_report.empty()) {
                const std::string js = rep.to_json().dump(2) + "\n";
                spgcde::write_file_bytes(ev_report, js.data(), js.size());
            }
        } else if (grid->parsed()) {
            spgcde::HarnessConfig cfg = load_config(gr_config);
            spgcde::run_grid(gr_data, cfg, split_csv(gr_presets), gr_out, print_line);
        } else if (pred->parsed()) {
            const fs::path case_dir = resolve_case_dir(pr_image);
            const fs::path root = case_dir.parent_path();
            const std::string id = case_dir.filename().string();
            spgcde::EvalOptions opt;
            opt.ckpt_kind = pr_kind;
            opt.prior_override = parse_source_opt(pr_source);
            std::optional<fs::path> prior_file;
            if (!pr_prior.empty()) prior_file = fs::path(pr_prior);
            const auto bundle =
                spgcde::predict_case(root, id, pr_ckpt, opt, prior_file, print_line);
            const fs::path out_dir = pr_out.empty() ? case_dir : fs::path(pr_out);
            std::optional<spgcde::ImageCase> c;
            if (pr_overlay) {
                int64_t warn = 0;
                c = spgcde::load_case(root, id, &warn);
            }
            spgcde::write_prediction(out_dir, bundle, c ? &c->image : nullptr);
            std::printf("wrote prediction for %s to %s\n", id.c_str(),
                        out_dir.string().c_str());
        }
        return spgcde::kExitOk;
    } catch (const spgcde::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return spgcde::kExitConfig;
    } catch (const spgcde::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return spgcde::kExitData;
    } catch (const spgcde::CheckpointError& e) {
        std::fprintf(stderr, "checkpoint error: %s\n", e.what());
        return spgcde::kExitCheckpoint;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
