#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "syncmatrix/encoders.hpp"
#include "syncmatrix/estimators.hpp"
#include "syncmatrix/similarity.hpp"
#include "syncmatrix/synthdata.hpp"

namespace syncmatrix {

enum class Method { baseline, diag_avg, sync_cls, sync_e2e };

std::string method_name(Method m);
Method method_from_string(const std::string& name);

/// Percentage of predictions within `tolerance` frames of the truth.
double accuracy(const std::vector<OffsetLabel>& preds, const std::vector<OffsetLabel>& truths,
                int tolerance);

/// Relative error reduction of a method over the baseline, in percent:
/// 100 * ((100 - baseline) - (100 - method)) / (100 - baseline).
double rer(double baseline_acc, double method_acc);

/// Trained models backing one clip length. The baseline and Diag-avg only
/// need encoders; Sync-cls adds the classifier, Sync-e2e its own pair.
struct ModelSet {
    std::optional<EncoderPair> encoders;
    std::optional<SyncClsNet> cls;
    std::optional<EncoderPair> e2e_encoders;
    std::optional<SyncClsNet> e2e_cls;
};

struct BenchmarkPlan {
    std::vector<Method> methods;
    std::vector<std::size_t> frame_lengths{11, 13, 15, 20};
    std::size_t trials = 10;
    std::size_t clips_per_trial = 1100;
    GenConfig gen;  // frames is overridden per length
    std::uint64_t seed = 0;
};

struct ReportCell {
    Method method;
    std::size_t frames;
    double mean_no_tol;
    double std_no_tol;
    double mean_tol;
    double std_tol;
    // empty when the method is the baseline itself or baseline error is zero
    std::optional<double> rer_no_tol;
    std::optional<double> rer_tol;
    std::size_t trials;
};

struct EvalReport {
    std::vector<ReportCell> cells;

    const ReportCell& cell(Method m, std::size_t frames) const;
};

/// Runs the repeated-trial protocol: each trial draws a fresh balanced eval
/// set (fresh offsets and noise) from a trial sub-seed, every method predicts
/// it, and accuracies with and without the +-1 frame tolerance are reduced to
/// mean and standard deviation across trials.
EvalReport run_benchmark(const BenchmarkPlan& plan,
                         const std::map<std::size_t, ModelSet>& models);

/// Predictions of one method over a clip set.
std::vector<OffsetLabel> predict_clips(Method method, const ModelSet& models,
                                       const std::vector<SyntheticClip>& clips);

void write_report_csv(const EvalReport& report, const std::string& path);
/// Aligned text table, one block per tolerance mode.
std::string format_report_table(const EvalReport& report);

}  // namespace syncmatrix
