#pragma once
// End-to-end runs over a case store: deterministic training with best/last
// checkpoint selection, native-resolution evaluation, the ablation grid, and
// single-case prediction artifacts.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spgcde/common.hpp"
#include "spgcde/data/augment.hpp"
#include "spgcde/data/case_store.hpp"
#include "spgcde/harness/checkpoint.hpp"
#include "spgcde/harness/config.hpp"
#include "spgcde/metrics/losses.hpp"
#include "spgcde/metrics/metrics.hpp"
#include "spgcde/metrics/report.hpp"
#include "spgcde/model/network.hpp"
#include "spgcde/model/prior_unet.hpp"
#include "spgcde/nn/sgd.hpp"
#include "spgcde/nn/upsample.hpp"
#include "spgcde/prior.hpp"

namespace spgcde {

using LogFn = std::function<void(const std::string&)>;

inline constexpr int kPriorTau = 0;

struct Dataset {
    std::vector<ImageCase> cases;  // sorted by case id
    int64_t clamp_warnings = 0;

    std::vector<int> split_indices(const std::string& split) const {
        std::vector<int> idx;
        for (int i = 0; i < static_cast<int>(cases.size()); ++i)
            if (cases[static_cast<size_t>(i)].split == split) idx.push_back(i);
        return idx;
    }

    int index_of(const std::string& case_id) const {
        for (int i = 0; i < static_cast<int>(cases.size()); ++i)
            if (cases[static_cast<size_t>(i)].case_id == case_id) return i;
        return -1;
    }
};

inline Dataset load_dataset(const std::filesystem::path& root) {
    Dataset ds;
    for (const auto& id : list_cases(root)) ds.cases.push_back(load_case(root, id, &ds.clamp_warnings));
    return ds;
}

inline void check_dataset_classes(const Dataset& ds, int num_classes) {
    for (const auto& c : ds.cases)
        if (c.num_classes != num_classes)
            throw BadConfig("case " + c.case_id + " declares " + std::to_string(c.num_classes) +
                            " classes, model is configured for " + std::to_string(num_classes));
}

namespace detail {

inline void emit(std::vector<std::string>* lines, const LogFn& fn, const std::string& s) {
    if (lines) lines->push_back(s);
    if (fn) fn(s);
}

inline std::string line_fmt(const char* fmt, ...) {
    char buf[256];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, ap);
    va_end(ap);
    return buf;
}

}  // namespace detail

inline std::vector<float> resize_plane(const std::vector<float>& src, int h, int w, int oh,
                                       int ow) {
    if (h == oh && w == ow) return src;
    Tensor<float> t({1, 1, h, w});
    std::copy(src.begin(), src.end(), t.data());
    Tensor<float> r = nn::bilinear_resize(t, oh, ow);
    return std::vector<float>(r.data(), r.data() + r.numel());
}

// Coarse class map feeding the masking stage, by configured source.
inline ClassMap resolve_prior(const ImageCase& c, PriorSource src, PriorUnet<float>* coarse) {
    ClassMap m;
    m.h = c.h;
    m.w = c.w;
    if (src == PriorSource::Files) {
        if (!c.prior) throw MissingPrior("case " + c.case_id + " has no stored prior");
        m.values = *c.prior;
        return m;
    }
    if (src == PriorSource::GroundTruthOracle) {
        m.values = c.label;
        return m;
    }
    if (!coarse) throw MissingPrior("no coarse segmenter available for case " + c.case_id);
    UnetPriorSegmenter seg(*coarse);
    return seg.predict(c.image, c.h, c.w);
}

struct PreparedCase {
    int case_index = -1;  // position in the dataset ordering
    std::string id;
    int h = 0, w = 0;  // network input extents
    std::vector<float> global_img;
    std::vector<float> local_img;  // masked stream; empty for single-encoder runs
    std::vector<uint8_t> label;
};

// Masking happens at native resolution, resizing after.
inline PreparedCase prepare_case(const ImageCase& c, int idx, const ClassMap* prior, int ih,
                                 int iw, bool want_local) {
    PreparedCase p;
    p.case_index = idx;
    p.id = c.case_id;
    p.h = ih;
    p.w = iw;
    p.global_img = resize_plane(c.image, c.h, c.w, ih, iw);
    if (want_local) {
        if (!prior) throw MissingPrior("case " + c.case_id + " prepared without a coarse map");
        LocalImage loc = apply_prior_map(c.image, c.h, c.w, *prior, kPriorTau);
        p.local_img = resize_plane(loc.pixels, c.h, c.w, ih, iw);
    }
    p.label = nn::nearest_resize(c.label, c.h, c.w, ih, iw);
    return p;
}

// Dispatch to the sigmoid path when the head emits a single channel.
inline float seg_loss_grad(const Tensor<float>& logits, const uint8_t* target,
                           const LossWeights& w, Tensor<float>& grad) {
    return logits.dim(1) == 1 ? binary_combined_loss_grad(logits, target, w, grad)
                              : combined_loss_grad(logits, target, w, grad);
}

// Class assignment from probabilities: argmax, or 0.5 threshold when binary.
inline std::vector<uint8_t> argmax_mask(const Tensor<float>& probs) {
    const int c = probs.ndim() == 4 ? probs.dim(1) : probs.dim(0);
    const int h = probs.ndim() == 4 ? probs.dim(2) : probs.dim(1);
    const int w = probs.ndim() == 4 ? probs.dim(3) : probs.dim(2);
    const int64_t plane = static_cast<int64_t>(h) * w;
    std::vector<uint8_t> out(static_cast<size_t>(plane), 0);
    const float* p = probs.data();
    if (c == 1) {
        for (int64_t i = 0; i < plane; ++i) out[static_cast<size_t>(i)] = p[i] > 0.5f ? 1 : 0;
        return out;
    }
    for (int64_t i = 0; i < plane; ++i) {
        int best = 0;
        float best_v = p[i];
        for (int ci = 1; ci < c; ++ci) {
            const float v = p[ci * plane + i];
            if (v > best_v) {
                best_v = v;
                best = ci;
            }
        }
        out[static_cast<size_t>(i)] = static_cast<uint8_t>(best);
    }
    return out;
}

inline std::vector<uint8_t> class_mask(const std::vector<uint8_t>& m, uint8_t cls) {
    std::vector<uint8_t> out(m.size(), 0);
    for (size_t i = 0; i < m.size(); ++i) out[i] = m[i] == cls ? 1 : 0;
    return out;
}

// Trains the built-in coarse segmenter on its own fixed recipe; returns the
// packed parameter archive for checkpointing.
inline std::vector<uint8_t> train_prior_net(PriorUnet<float>& net, const Dataset& ds,
                                            const std::vector<int>& train_idx,
                                            const TrainConfig& tc,
                                            std::vector<std::string>* lines = nullptr,
                                            const LogFn& fn = {}) {
    if (train_idx.empty()) throw DataError("no cases in split 'train'");
    const int ih = tc.input_h, iw = tc.input_w;
    std::vector<std::vector<float>> imgs;
    std::vector<std::vector<uint8_t>> labs;
    for (int i : train_idx) {
        const ImageCase& c = ds.cases[static_cast<size_t>(i)];
        imgs.push_back(resize_plane(c.image, c.h, c.w, ih, iw));
        labs.push_back(nn::nearest_resize(c.label, c.h, c.w, ih, iw));
    }
    auto reg = net.registry();
    nn::SgdOptimizer<float> opt(0.9, 1e-4);
    const double lr = 0.05;
    Rng pick(hash_seed(tc.seed, 0xc0a25eu));
    const int n = static_cast<int>(train_idx.size());
    const int batch = std::min(tc.batch_size, n);
    const int64_t plane = static_cast<int64_t>(ih) * iw;
    LossWeights lw;
    double loss = 0.0;
    for (int s = 0; s < tc.prior_steps; ++s) {
        Tensor<float> x({batch, 1, ih, iw});
        std::vector<uint8_t> y(static_cast<size_t>(batch) * plane);
        for (int b = 0; b < batch; ++b) {
            const int j = static_cast<int>(pick.below(static_cast<uint64_t>(n)));
            std::copy(imgs[static_cast<size_t>(j)].begin(), imgs[static_cast<size_t>(j)].end(),
                      x.data() + x.offset4(b));
            std::copy(labs[static_cast<size_t>(j)].begin(), labs[static_cast<size_t>(j)].end(),
                      y.begin() + static_cast<int64_t>(b) * plane);
        }
        Tensor<float> logits = net.forward(x, true, true);
        Tensor<float> grad;
        loss = seg_loss_grad(logits, y.data(), lw, grad);
        net.backward(grad);
        opt.step(reg, lr);
        reg.zero_grad();
        net.release_cache();
        if ((s + 1) % 40 == 0 || s + 1 == tc.prior_steps)
            detail::emit(lines, fn,
                         detail::line_fmt("coarse step %4d  loss %s", s + 1,
                                          fmt_fixed(loss, 6).c_str()));
    }
    return pack_registry(reg);
}

// Mean foreground overlap on held-out cases at network resolution; the cheap
// signal that drives best-checkpoint selection.
inline double quick_val_dsc(SegNet<float>& net, const std::vector<PreparedCase>& val,
                            int num_classes) {
    if (val.empty()) return -1.0;
    double acc = 0.0;
    int64_t terms = 0;
    const int eval_classes = num_classes == 1 ? 2 : num_classes;
    for (const auto& p : val) {
        Tensor<float> xg({1, 1, p.h, p.w});
        std::copy(p.global_img.begin(), p.global_img.end(), xg.data());
        Tensor<float> xl;
        if (net.dual()) {
            xl = Tensor<float>({1, 1, p.h, p.w});
            std::copy(p.local_img.begin(), p.local_img.end(), xl.data());
        }
        Tensor<float> logits = net.forward(xg, net.dual() ? &xl : nullptr, false, false);
        const std::vector<uint8_t> pred = argmax_mask(net.probabilities(logits));
        for (int cls = 1; cls < eval_classes; ++cls) {
            acc += dsc(class_mask(pred, static_cast<uint8_t>(cls)),
                       class_mask(p.label, static_cast<uint8_t>(cls)));
            ++terms;
        }
        net.release_cache();
    }
    return terms ? acc / static_cast<double>(terms) : -1.0;
}

// Full benchmark pass: probabilities resampled back to native resolution,
// overlap plus boundary distance per foreground class.
inline MetricReport evaluate_cases(SegNet<float>& net, const Dataset& ds,
                                   const std::vector<int>& idx,
                                   const std::map<int, ClassMap>* priors,
                                   const HarnessConfig& cfg) {
    MetricReport rep;
    const int c_model = cfg.model.num_classes;
    rep.num_classes = c_model == 1 ? 2 : c_model;
    for (int i : idx) {
        const ImageCase& c = ds.cases[static_cast<size_t>(i)];
        const ClassMap* pm = priors ? &priors->at(i) : nullptr;
        PreparedCase p =
            prepare_case(c, i, pm, cfg.train.input_h, cfg.train.input_w, net.dual());
        Tensor<float> xg({1, 1, p.h, p.w});
        std::copy(p.global_img.begin(), p.global_img.end(), xg.data());
        Tensor<float> xl;
        if (net.dual()) {
            xl = Tensor<float>({1, 1, p.h, p.w});
            std::copy(p.local_img.begin(), p.local_img.end(), xl.data());
        }
        Tensor<float> logits = net.forward(xg, net.dual() ? &xl : nullptr, false, false);
        Tensor<float> probs = net.probabilities(logits);
        if (p.h != c.h || p.w != c.w) probs = nn::bilinear_resize(probs, c.h, c.w);
        const std::vector<uint8_t> pred = argmax_mask(probs);
        std::vector<ClassMetrics> rows;
        for (int cls = 1; cls < rep.num_classes; ++cls) {
            const auto pmask = class_mask(pred, static_cast<uint8_t>(cls));
            const auto gmask = class_mask(c.label, static_cast<uint8_t>(cls));
            ClassMetrics m;
            m.dsc = dsc(pmask, gmask);
            m.hd95 = hd95(pmask, gmask, c.h, c.w, c.spacing_y, c.spacing_x);
            rows.push_back(m);
        }
        rep.per_case[c.case_id] = std::move(rows);
        net.release_cache();
    }
    return rep;
}

struct TrainResult {
    std::filesystem::path run_dir;
    int epochs_run = 0;
    int steps_run = 0;
    double final_loss = 0.0;
    double best_val_dsc = -1.0;
    int best_epoch = -1;
    int64_t param_count = 0;
};

inline TrainResult train_run(const std::filesystem::path& data_root, const HarnessConfig& cfg,
                             const std::filesystem::path& run_dir, const LogFn& fn = {}) {
    cfg.model.validate();
    cfg.ablation.validate();
    cfg.train.validate();
    if (cfg.train.input_h % 32 != 0 || cfg.train.input_w % 32 != 0)
        throw BadGeometry("input size must be divisible by 32, got " +
                          std::to_string(cfg.train.input_h) + "x" +
                          std::to_string(cfg.train.input_w));

    std::filesystem::create_directories(run_dir);
    {
        const std::string text = cfg.to_json().dump(2) + "\n";
        write_file_bytes(run_dir / "config.json", text.data(), text.size());
    }

    std::vector<std::string> lines;
    auto log = [&](const std::string& s) { detail::emit(&lines, fn, s); };

    Dataset ds = load_dataset(data_root);
    check_dataset_classes(ds, cfg.model.num_classes);
    const auto train_idx = ds.split_indices("train");
    const auto val_idx = ds.split_indices("val");
    if (train_idx.empty()) throw DataError("no cases in split 'train'");
    log(detail::line_fmt("cases train %d  val %d", static_cast<int>(train_idx.size()),
                         static_cast<int>(val_idx.size())));
    if (ds.clamp_warnings > 0)
        log(detail::line_fmt("clamped %lld out-of-range intensities",
                             static_cast<long long>(ds.clamp_warnings)));

    // Coarse maps are resolved once; the built-in net trains first when asked for.
    std::unique_ptr<PriorUnet<float>> coarse;
    std::vector<uint8_t> coarse_bytes;
    std::map<int, ClassMap> priors;
    if (cfg.ablation.use_prior) {
        if (cfg.ablation.prior_source == PriorSource::BuiltinUnet) {
            coarse = std::make_unique<PriorUnet<float>>(cfg.model.num_classes, cfg.train.seed);
            coarse_bytes = train_prior_net(*coarse, ds, train_idx, cfg.train, &lines, fn);
        }
        for (int i : train_idx)
            priors.emplace(i, resolve_prior(ds.cases[static_cast<size_t>(i)],
                                            cfg.ablation.prior_source, coarse.get()));
        for (int i : val_idx)
            priors.emplace(i, resolve_prior(ds.cases[static_cast<size_t>(i)],
                                            cfg.ablation.prior_source, coarse.get()));
    }

    const bool dual = cfg.ablation.use_local_encoder;
    std::vector<PreparedCase> train_pc, val_pc;
    for (int i : train_idx)
        train_pc.push_back(prepare_case(ds.cases[static_cast<size_t>(i)], i,
                                        cfg.ablation.use_prior ? &priors.at(i) : nullptr,
                                        cfg.train.input_h, cfg.train.input_w, dual));
    for (int i : val_idx)
        val_pc.push_back(prepare_case(ds.cases[static_cast<size_t>(i)], i,
                                      cfg.ablation.use_prior ? &priors.at(i) : nullptr,
                                      cfg.train.input_h, cfg.train.input_w, dual));

    SegNet<float> net(cfg.model, cfg.ablation, cfg.train.seed);
    auto reg = net.registry();
    nn::SgdOptimizer<float> opt(cfg.train.momentum, cfg.train.weight_decay);
    const std::string hash = config_hash(cfg.model, cfg.ablation);

    TrainResult res;
    res.run_dir = run_dir;
    res.param_count = reg.param_count();
    log(detail::line_fmt("variant %s  params %lld  config %s",
                         fusion_name(cfg.ablation.fusion).c_str(),
                         static_cast<long long>(res.param_count), hash.c_str()));

    const int n = static_cast<int>(train_pc.size());
    const int batch = std::min(cfg.train.batch_size, n);
    const int steps_per_epoch = (n + batch - 1) / batch;
    const int64_t total_steps =
        cfg.train.max_steps > 0
            ? cfg.train.max_steps
            : static_cast<int64_t>(cfg.train.max_epochs) * steps_per_epoch;
    const int epochs = static_cast<int>((total_steps + steps_per_epoch - 1) / steps_per_epoch);
    const int64_t plane = static_cast<int64_t>(cfg.train.input_h) * cfg.train.input_w;
    const bool poly = cfg.train.lr_schedule == "poly";

    std::vector<uint8_t> best_bytes;
    CheckpointInfo best_info;
    double last_val = -1.0;
    int64_t step = 0;

    for (int e = 0; e < epochs && step < total_steps; ++e) {
        std::vector<int> order(train_pc.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        Rng shuffler(hash_seed(cfg.train.seed, 0x50cfu, static_cast<uint64_t>(e)));
        shuffler.shuffle(order);

        double epoch_loss = 0.0;
        int epoch_steps = 0;
        double lr = cfg.train.base_lr;
        for (size_t first = 0; first < order.size() && step < total_steps; first += batch) {
            const int count = static_cast<int>(
                std::min<size_t>(static_cast<size_t>(batch), order.size() - first));
            Tensor<float> xg({count, 1, cfg.train.input_h, cfg.train.input_w});
            Tensor<float> xl;
            if (dual) xl = Tensor<float>({count, 1, cfg.train.input_h, cfg.train.input_w});
            std::vector<uint8_t> y(static_cast<size_t>(count) * plane);
            for (int b = 0; b < count; ++b) {
                const PreparedCase& p = train_pc[static_cast<size_t>(order[first + b])];
                if (cfg.train.augment) {
                    AugmentDraw d = draw_augment(
                        hash_seed(cfg.train.seed, static_cast<uint64_t>(e),
                                  static_cast<uint64_t>(p.case_index)),
                        cfg.train.small_angle_augment);
                    if (p.h != p.w && d.rot90 % 2 == 1) d.rot90 = (d.rot90 + 1) % 4;
                    AugmentedPair ap = apply_augment(d, p.global_img, p.local_img, p.label,
                                                     p.h, p.w);
                    std::copy(ap.global_img.begin(), ap.global_img.end(),
                              xg.data() + xg.offset4(b));
                    if (dual)
                        std::copy(ap.local_img.begin(), ap.local_img.end(),
                                  xl.data() + xl.offset4(b));
                    std::copy(ap.label.begin(), ap.label.end(),
                              y.begin() + static_cast<int64_t>(b) * plane);
                } else {
                    std::copy(p.global_img.begin(), p.global_img.end(),
                              xg.data() + xg.offset4(b));
                    if (dual)
                        std::copy(p.local_img.begin(), p.local_img.end(),
                                  xl.data() + xl.offset4(b));
                    std::copy(p.label.begin(), p.label.end(),
                              y.begin() + static_cast<int64_t>(b) * plane);
                }
            }
            lr = poly ? nn::poly_lr(cfg.train.base_lr, step, total_steps, cfg.train.poly_power)
                      : cfg.train.base_lr;
            Tensor<float> logits = net.forward(xg, dual ? &xl : nullptr, true, true);
            Tensor<float> grad;
            const float loss = seg_loss_grad(logits, y.data(), cfg.train.loss, grad);
            net.backward(grad);
            opt.step(reg, lr);
            reg.zero_grad();
            net.release_cache();
            epoch_loss += loss;
            ++epoch_steps;
            ++step;
        }
        res.epochs_run = e + 1;
        res.final_loss = epoch_steps ? epoch_loss / epoch_steps : 0.0;
        log(detail::line_fmt("epoch %3d  lr %s  loss %s", e + 1, fmt_fixed(lr, 6).c_str(),
                             fmt_fixed(res.final_loss, 6).c_str()));

        const bool last_epoch = e + 1 == epochs || step >= total_steps;
        if (!val_pc.empty() &&
            ((e + 1) % cfg.train.val_interval == 0 || last_epoch)) {
            last_val = quick_val_dsc(net, val_pc, cfg.model.num_classes);
            log(detail::line_fmt("epoch %3d  val_dsc %s", e + 1,
                                 fmt_fixed(last_val, 6).c_str()));
            if (last_val > res.best_val_dsc) {
                res.best_val_dsc = last_val;
                res.best_epoch = e + 1;
                best_bytes = pack_registry(reg);
                best_info = CheckpointInfo{hash, e + 1, last_val,
                                           !coarse_bytes.empty(), ""};
            }
        }
    }
    res.steps_run = static_cast<int>(step);

    const std::vector<uint8_t>* prior_ptr = coarse_bytes.empty() ? nullptr : &coarse_bytes;
    CheckpointInfo last_info{hash, res.epochs_run, last_val, prior_ptr != nullptr, ""};
    write_checkpoint(run_dir / "ckpt_last", pack_registry(reg), last_info, prior_ptr);
    if (best_bytes.empty()) {
        best_bytes = pack_registry(reg);
        best_info = last_info;
        res.best_epoch = res.epochs_run;
    }
    write_checkpoint(run_dir / "ckpt_best", best_bytes, best_info, prior_ptr);
    log(detail::line_fmt("saved ckpt_best epoch %3d  ckpt_last epoch %3d", best_info.epoch,
                         last_info.epoch));

    std::string text;
    for (const auto& l : lines) text += l + "\n";
    write_file_bytes(run_dir / "log.txt", text.data(), text.size());
    return res;
}

struct EvalOptions {
    std::string split = "test";
    std::string ckpt_kind = "best";
    std::optional<PriorSource> prior_override;
};

struct LoadedRun {
    HarnessConfig cfg;
    CheckpointInfo info;
    std::unique_ptr<SegNet<float>> net;
    std::unique_ptr<PriorUnet<float>> coarse;  // present when the archive stores one
};

inline LoadedRun load_run(const std::filesystem::path& run_dir, const std::string& ckpt_kind,
                          std::optional<PriorSource> prior_override) {
    if (ckpt_kind != "best" && ckpt_kind != "last")
        throw BadConfig("checkpoint kind must be 'best' or 'last', got '" + ckpt_kind + "'");
    const auto cfg_path = run_dir / "config.json";
    if (!std::filesystem::exists(cfg_path))
        throw CheckpointMismatch("run directory has no config.json: " + run_dir.string());
    LoadedRun run;
    run.cfg = HarnessConfig::from_json_text(read_file_text(cfg_path));
    if (prior_override) {
        if (!run.cfg.ablation.use_prior)
            throw BadConfig("this run's model takes no prior input, nothing to swap");
        run.cfg.ablation.prior_source = *prior_override;
    }
    run.net = std::make_unique<SegNet<float>>(run.cfg.model, run.cfg.ablation,
                                              run.cfg.train.seed);
    auto reg = run.net->registry();
    const auto dir = run_dir / ("ckpt_" + ckpt_kind);
    run.info = load_checkpoint(dir, reg, config_hash(run.cfg.model, run.cfg.ablation));
    if (run.cfg.ablation.use_prior &&
        run.cfg.ablation.prior_source == PriorSource::BuiltinUnet) {
        const auto pb = dir / "prior.bin";
        if (std::filesystem::exists(pb)) {
            run.coarse = std::make_unique<PriorUnet<float>>(run.cfg.model.num_classes,
                                                            run.cfg.train.seed);
            auto preg = run.coarse->registry();
            unpack_registry(read_file_bytes(pb), preg);
        }
    }
    return run;
}

// Fit a coarse net on the spot when a run is re-pointed at the built-in
// source but its checkpoint never stored one.
inline void ensure_coarse(LoadedRun& run, const Dataset& ds, const LogFn& fn) {
    if (!run.cfg.ablation.use_prior ||
        run.cfg.ablation.prior_source != PriorSource::BuiltinUnet || run.coarse)
        return;
    const auto train_idx = ds.split_indices("train");
    if (train_idx.empty())
        throw MissingPrior("checkpoint stores no coarse segmenter and the store has no "
                           "train split to fit one");
    run.coarse = std::make_unique<PriorUnet<float>>(run.cfg.model.num_classes,
                                                    run.cfg.train.seed);
    train_prior_net(*run.coarse, ds, train_idx, run.cfg.train, nullptr, fn);
}

inline MetricReport evaluate_run(const std::filesystem::path& data_root,
                                 const std::filesystem::path& run_dir,
                                 const EvalOptions& opt = {}, const LogFn& fn = {}) {
    LoadedRun run = load_run(run_dir, opt.ckpt_kind, opt.prior_override);
    Dataset ds = load_dataset(data_root);
    check_dataset_classes(ds, run.cfg.model.num_classes);
    const auto idx = ds.split_indices(opt.split);
    if (idx.empty()) throw DataError("no cases in split '" + opt.split + "'");
    std::map<int, ClassMap> priors;
    if (run.cfg.ablation.use_prior) {
        ensure_coarse(run, ds, fn);
        for (int i : idx)
            priors.emplace(i, resolve_prior(ds.cases[static_cast<size_t>(i)],
                                            run.cfg.ablation.prior_source, run.coarse.get()));
    }
    return evaluate_cases(*run.net, ds, idx,
                          run.cfg.ablation.use_prior ? &priors : nullptr, run.cfg);
}

struct GridRow {
    std::string preset;
    int64_t params = 0;
    MetricReport report;
};

// Published full-scale DSC% figures the ablation ordering is judged against.
inline std::string grid_reference_line() {
    return "reference full-scale DSC%: single encoder 80.09, dual encoder 82.47, "
           "dual + crossing attention 85.97 (abdominal CT benchmark)";
}

inline std::string grid_table(const std::vector<GridRow>& rows) {
    auto pad = [](std::string s, size_t n) {
        if (s.size() < n) s.insert(0, n - s.size(), ' ');
        return s;
    };
    std::string out = grid_reference_line() + "\n";
    const int classes = rows.empty() ? 0 : rows.front().report.num_classes;
    std::string head = "preset   ";
    head += pad("params", 10) + pad("DSC(%)", 10) + pad("HD95", 10);
    for (int c = 1; c < classes; ++c) head += pad("class" + std::to_string(c), 10);
    out += head + "\n";
    for (const auto& r : rows) {
        std::string line = r.preset;
        if (line.size() < 9) line.resize(9, ' ');
        line += pad(std::to_string(r.params), 10);
        line += pad(fmt_fixed(r.report.mean_dsc() * 100.0, 4), 10);
        const auto hd = r.report.mean_hd95();
        line += pad(hd ? fmt_fixed(*hd, 4) : "n/a", 10);
        for (int c = 0; c + 1 < classes; ++c)
            line += pad(fmt_fixed(r.report.class_mean_dsc(c) * 100.0, 4), 10);
        out += line + "\n";
    }
    return out;
}

inline nlohmann::ordered_json grid_json(const std::vector<GridRow>& rows) {
    nlohmann::ordered_json j;
    j["reference"] = grid_reference_line();
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json e;
        e["preset"] = r.preset;
        e["params"] = r.params;
        e["metrics"] = r.report.to_json();
        arr.push_back(std::move(e));
    }
    j["rows"] = std::move(arr);
    return j;
}

// Same data, seed, and step budget for every preset; reports come from the
// val split with the best checkpoint.
inline std::vector<GridRow> run_grid(const std::filesystem::path& data_root,
                                     const HarnessConfig& base,
                                     const std::vector<std::string>& presets,
                                     const std::filesystem::path& out_dir,
                                     const LogFn& fn = {}) {
    std::vector<GridRow> rows;
    for (const auto& name : presets) {
        HarnessConfig cfg = base;
        AblationConfig ab = AblationConfig::preset(name);
        if (ab.use_prior) ab.prior_source = base.ablation.prior_source;
        cfg.ablation = ab;
        if (fn) fn("== preset " + name + " ==");
        const auto run_dir = out_dir / ("run_" + name);
        TrainResult tr = train_run(data_root, cfg, run_dir, fn);
        EvalOptions eo;
        eo.split = "val";
        MetricReport rep = evaluate_run(data_root, run_dir, eo, fn);
        rows.push_back(GridRow{name, tr.param_count, std::move(rep)});
    }
    std::filesystem::create_directories(out_dir);
    const std::string table = grid_table(rows);
    write_file_bytes(out_dir / "grid_report.txt", table.data(), table.size());
    const std::string js = grid_json(rows).dump(2) + "\n";
    write_file_bytes(out_dir / "grid_report.json", js.data(), js.size());
    if (fn) fn(table);
    return rows;
}

struct PredictionBundle {
    std::string case_id;
    int h = 0, w = 0;
    int num_classes = 0;
    Tensor<float> probs;        // (C, h, w) at native resolution
    std::vector<uint8_t> mask;  // class per pixel
    std::string config_hash;
    std::string checkpoint_id;  // parameter digest
    int checkpoint_epoch = 0;
};

inline PredictionBundle predict_case(const std::filesystem::path& data_root,
                                     const std::string& case_id,
                                     const std::filesystem::path& run_dir,
                                     const EvalOptions& opt = {},
                                     const std::optional<std::filesystem::path>& prior_file = {},
                                     const LogFn& fn = {}) {
    LoadedRun run = load_run(run_dir, opt.ckpt_kind, opt.prior_override);
    int64_t warn = 0;
    ImageCase c = load_case(data_root, case_id, &warn);
    if (c.num_classes != run.cfg.model.num_classes)
        throw BadConfig("case " + c.case_id + " declares " + std::to_string(c.num_classes) +
                        " classes, model is configured for " +
                        std::to_string(run.cfg.model.num_classes));
    if (prior_file) {
        const auto bytes = read_file_bytes(*prior_file);
        if (bytes.size() != static_cast<size_t>(c.h) * static_cast<size_t>(c.w))
            throw ShapeMismatch("prior file holds " + std::to_string(bytes.size()) +
                                " pixels, case image has " +
                                std::to_string(static_cast<size_t>(c.h) * c.w));
        c.prior = std::vector<uint8_t>(bytes.begin(), bytes.end());
    }

    std::optional<ClassMap> prior;
    if (run.cfg.ablation.use_prior) {
        if (run.cfg.ablation.prior_source == PriorSource::BuiltinUnet && !run.coarse) {
            Dataset ds = load_dataset(data_root);
            ensure_coarse(run, ds, fn);
        }
        prior = resolve_prior(c, run.cfg.ablation.prior_source, run.coarse.get());
    }
    PreparedCase p = prepare_case(c, 0, prior ? &*prior : nullptr, run.cfg.train.input_h,
                                  run.cfg.train.input_w, run.net->dual());
    Tensor<float> xg({1, 1, p.h, p.w});
    std::copy(p.global_img.begin(), p.global_img.end(), xg.data());
    Tensor<float> xl;
    if (run.net->dual()) {
        xl = Tensor<float>({1, 1, p.h, p.w});
        std::copy(p.local_img.begin(), p.local_img.end(), xl.data());
    }
    Tensor<float> logits = run.net->forward(xg, run.net->dual() ? &xl : nullptr, false, false);
    Tensor<float> probs = run.net->probabilities(logits);
    if (p.h != c.h || p.w != c.w) probs = nn::bilinear_resize(probs, c.h, c.w);
    run.net->release_cache();

    PredictionBundle b;
    b.case_id = case_id;
    b.h = c.h;
    b.w = c.w;
    b.num_classes = probs.dim(1);
    b.mask = argmax_mask(probs);
    b.probs = Tensor<float>({probs.dim(1), c.h, c.w});
    std::copy(probs.data(), probs.data() + probs.numel(), b.probs.data());
    b.config_hash = run.info.config_hash;
    b.checkpoint_id = run.info.params_fnv;
    b.checkpoint_epoch = run.info.epoch;
    return b;
}

inline const std::array<std::array<uint8_t, 3>, 8>& class_palette() {
    static const std::array<std::array<uint8_t, 3>, 8> p = {{{220, 50, 47},
                                                             {38, 139, 210},
                                                             {133, 153, 0},
                                                             {181, 137, 0},
                                                             {211, 54, 130},
                                                             {42, 161, 152},
                                                             {203, 75, 22},
                                                             {108, 113, 196}}};
    return p;
}

inline void write_ppm(const std::filesystem::path& path, const std::vector<uint8_t>& rgb,
                      int h, int w) {
    std::string header = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    std::vector<uint8_t> bytes(header.begin(), header.end());
    bytes.insert(bytes.end(), rgb.begin(), rgb.end());
    write_file_bytes(path, bytes.data(), bytes.size());
}

// Grayscale image with predicted classes blended on top.
inline std::vector<uint8_t> render_overlay(const std::vector<float>& image,
                                           const std::vector<uint8_t>& mask, int h, int w) {
    std::vector<uint8_t> rgb(static_cast<size_t>(h) * w * 3);
    const auto& pal = class_palette();
    for (size_t i = 0; i < static_cast<size_t>(h) * w; ++i) {
        const float v = std::clamp(image[i], 0.0f, 1.0f);
        const uint8_t g = static_cast<uint8_t>(std::lround(v * 255.0f));
        uint8_t r = g, gg = g, bb = g;
        if (mask[i] > 0) {
            const auto& c = pal[(mask[i] - 1) % pal.size()];
            r = static_cast<uint8_t>((g + c[0]) / 2);
            gg = static_cast<uint8_t>((g + c[1]) / 2);
            bb = static_cast<uint8_t>((g + c[2]) / 2);
        }
        rgb[i * 3] = r;
        rgb[i * 3 + 1] = gg;
        rgb[i * 3 + 2] = bb;
    }
    return rgb;
}

inline void write_prediction(const std::filesystem::path& out_dir, const PredictionBundle& b,
                             const std::vector<float>* image_for_overlay = nullptr) {
    std::filesystem::create_directories(out_dir);
    write_file_bytes(out_dir / "pred.u8", b.mask.data(), b.mask.size());
    write_file_bytes(out_dir / "probs.f32", b.probs.data(),
                     static_cast<size_t>(b.probs.numel()) * sizeof(float));
    nlohmann::ordered_json m;
    m["case_id"] = b.case_id;
    m["height"] = b.h;
    m["width"] = b.w;
    m["num_classes"] = b.num_classes;
    m["config_hash"] = b.config_hash;
    m["checkpoint_id"] = b.checkpoint_id;
    m["checkpoint_epoch"] = b.checkpoint_epoch;
    const std::string text = m.dump(2) + "\n";
    write_file_bytes(out_dir / "pred_meta.json", text.data(), text.size());
    if (image_for_overlay)
        write_ppm(out_dir / "overlay.ppm", render_overlay(*image_for_overlay, b.mask, b.h, b.w),
                  b.h, b.w);
}

}  // namespace spgcde
