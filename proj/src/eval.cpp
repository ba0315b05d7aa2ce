#include "syncmatrix/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "syncmatrix/errors.hpp"
#include "syncmatrix/rng.hpp"

namespace syncmatrix {

std::string method_name(Method m) {
    switch (m) {
        case Method::baseline: return "baseline";
        case Method::diag_avg: return "diag-avg";
        case Method::sync_cls: return "sync-cls";
        case Method::sync_e2e: return "sync-e2e";
    }
    return "?";
}

Method method_from_string(const std::string& name) {
    if (name == "baseline") return Method::baseline;
    if (name == "diag-avg" || name == "diag_avg") return Method::diag_avg;
    if (name == "sync-cls" || name == "sync_cls") return Method::sync_cls;
    if (name == "sync-e2e" || name == "sync_e2e") return Method::sync_e2e;
    throw ConfigError("unknown method '" + name + "'");
}

double accuracy(const std::vector<OffsetLabel>& preds, const std::vector<OffsetLabel>& truths,
                int tolerance) {
    if (preds.empty() || truths.empty()) throw ArgumentError("accuracy: empty prediction list");
    if (preds.size() != truths.size())
        throw DimensionError("accuracy: prediction/truth counts differ");
    if (tolerance < 0) throw ArgumentError("accuracy: negative tolerance");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (std::abs(preds[i].offset - truths[i].offset) <= tolerance) ++hits;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(preds.size());
}

double rer(double baseline_acc, double method_acc) {
    if (baseline_acc >= 100.0)
        throw ArgumentError("rer: undefined when the baseline has no error");
    return 100.0 * (method_acc - baseline_acc) / (100.0 - baseline_acc);
}

const ReportCell& EvalReport::cell(Method m, std::size_t frames) const {
    for (const auto& c : cells)
        if (c.method == m && c.frames == frames) return c;
    throw ArgumentError("report: no cell for " + method_name(m) + " at " +
                        std::to_string(frames) + " frames");
}

std::vector<OffsetLabel> predict_clips(Method method, const ModelSet& models,
                                       const std::vector<SyntheticClip>& clips) {
    const bool e2e = method == Method::sync_e2e;
    const auto& enc_opt = e2e ? models.e2e_encoders : models.encoders;
    if (!enc_opt) throw ConfigError("predict: missing encoder model for " + method_name(method));
    const EncoderPair& enc = *enc_opt;

    std::vector<OffsetLabel> preds;
    preds.reserve(clips.size());
    if (method == Method::baseline) {
        for (const auto& clip : clips)
            preds.push_back(sliding_window_offset(enc.audio.encode(clip.audio_raw, Modality::audio),
                                                  enc.video.encode(clip.video_raw, Modality::visual))
                                .offset);
        return preds;
    }
    if (method == Method::diag_avg) {
        for (const auto& clip : clips)
            preds.push_back(diag_avg_offset(clip_similarity(enc, clip)).offset);
        return preds;
    }
    const auto& net_opt = e2e ? models.e2e_cls : models.cls;
    if (!net_opt) throw ConfigError("predict: missing classifier model for " + method_name(method));
    std::vector<SimilarityMatrix> ms;
    ms.reserve(clips.size());
    for (const auto& clip : clips) ms.push_back(clip_similarity(enc, clip));
    return net_opt->predict_batch(ms);
}

EvalReport run_benchmark(const BenchmarkPlan& plan, const std::map<std::size_t, ModelSet>& models) {
    if (plan.methods.empty()) throw ArgumentError("run_benchmark: no methods selected");
    if (plan.trials == 0) throw ArgumentError("run_benchmark: trials must be positive");

    EvalReport report;
    for (std::size_t frames : plan.frame_lengths) {
        const auto model_it = models.find(frames);
        if (model_it == models.end())
            throw ConfigError("run_benchmark: no models for " + std::to_string(frames) +
                              " frames");
        const ModelSet& ms = model_it->second;

        // per method, accuracies over trials at both tolerances
        std::map<Method, std::vector<double>> acc0, acc1;
        for (std::size_t trial = 0; trial < plan.trials; ++trial) {
            GenConfig cfg = plan.gen;
            cfg.frames = frames;
            const std::uint64_t trial_seed =
                derive_seed(plan.seed, "eval.trial", trial * 1000 + frames);
            Dataset ds = generate_dataset(cfg, plan.clips_per_trial, trial_seed);
            std::vector<OffsetLabel> truths;
            truths.reserve(ds.clips.size());
            for (const auto& c : ds.clips) truths.push_back(c.truth);
            for (Method m : plan.methods) {
                const auto preds = predict_clips(m, ms, ds.clips);
                acc0[m].push_back(accuracy(preds, truths, 0));
                acc1[m].push_back(accuracy(preds, truths, 1));
            }
        }

        auto mean_of = [](const std::vector<double>& xs) {
            double s = 0;
            for (double x : xs) s += x;
            return s / static_cast<double>(xs.size());
        };
        auto std_of = [&](const std::vector<double>& xs, double mu) {
            double s = 0;
            for (double x : xs) s += (x - mu) * (x - mu);
            return std::sqrt(s / static_cast<double>(xs.size()));
        };

        const bool have_baseline =
            std::find(plan.methods.begin(), plan.methods.end(), Method::baseline) !=
            plan.methods.end();
        const double base0 = have_baseline ? mean_of(acc0[Method::baseline]) : 0.0;
        const double base1 = have_baseline ? mean_of(acc1[Method::baseline]) : 0.0;

        for (Method m : plan.methods) {
            ReportCell cell{};
            cell.method = m;
            cell.frames = frames;
            cell.trials = plan.trials;
            cell.mean_no_tol = mean_of(acc0[m]);
            cell.std_no_tol = std_of(acc0[m], cell.mean_no_tol);
            cell.mean_tol = mean_of(acc1[m]);
            cell.std_tol = std_of(acc1[m], cell.mean_tol);
            if (have_baseline && m != Method::baseline) {
                if (base0 < 100.0) cell.rer_no_tol = rer(base0, cell.mean_no_tol);
                if (base1 < 100.0) cell.rer_tol = rer(base1, cell.mean_tol);
            }
            report.cells.push_back(cell);
        }
    }
    return report;
}

namespace {
std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}
}  // namespace

void write_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << "method,frames,tolerance,mean,std,rer\n";
    for (const auto& c : report.cells) {
        os << method_name(c.method) << ',' << c.frames << ",0," << fmt2(c.mean_no_tol) << ','
           << fmt2(c.std_no_tol) << ',' << (c.rer_no_tol ? fmt2(*c.rer_no_tol) : "") << '\n';
        os << method_name(c.method) << ',' << c.frames << ",1," << fmt2(c.mean_tol) << ','
           << fmt2(c.std_tol) << ',' << (c.rer_tol ? fmt2(*c.rer_tol) : "") << '\n';
    }
    if (!os) throw IoError("write failed for '" + path + "'");
}

std::string format_report_table(const EvalReport& report) {
    std::vector<std::size_t> frames;
    std::vector<Method> methods;
    for (const auto& c : report.cells) {
        if (std::find(frames.begin(), frames.end(), c.frames) == frames.end())
            frames.push_back(c.frames);
        if (std::find(methods.begin(), methods.end(), c.method) == methods.end())
            methods.push_back(c.method);
    }

    std::ostringstream os;
    for (int tol = 0; tol <= 1; ++tol) {
        os << "Accuracy (%) " << (tol ? "with" : "without") << " tolerance, RER in brackets\n";
        os << "frames    ";
        for (std::size_t f : frames) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%20zu", f);
            os << buf;
        }
        os << '\n';
        for (Method m : methods) {
            char name[32];
            std::snprintf(name, sizeof name, "%-10s", method_name(m).c_str());
            os << name;
            for (std::size_t f : frames) {
                const ReportCell& c = report.cell(m, f);
                const double mean = tol ? c.mean_tol : c.mean_no_tol;
                const double sd = tol ? c.std_tol : c.std_no_tol;
                const auto& r = tol ? c.rer_tol : c.rer_no_tol;
                std::string s = fmt2(mean) + "+-" + fmt2(sd);
                if (r) s += " (" + fmt2(*r) + ")";
                char buf[48];
                std::snprintf(buf, sizeof buf, "%20s", s.c_str());
                os << buf;
            }
            os << '\n';
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace syncmatrix
