#pragma once

#include <iosfwd>
#include <string>

#include "syncmatrix/config.hpp"
#include "syncmatrix/tensor.hpp"

namespace syncmatrix::cli {

// Commands throw on failure; the CLI entry point maps exception types to exit
// codes (config 2, I/O 3, numeric/training 4).
void cmd_gen(const RunConfig& cfg);
void cmd_train_embed(const RunConfig& cfg);
void cmd_train_cls(const RunConfig& cfg);
void cmd_train_e2e(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg);
void cmd_saliency(const RunConfig& cfg);
/// Reads two feature-stream CSVs and prints the estimated offset to `out`.
/// `model_path` is only consulted by the classifier methods.
void cmd_infer(const std::string& audio_csv, const std::string& video_csv,
               const std::string& method, const std::string& model_path, std::ostream& out);

/// N x D feature matrix from a CSV of comma-separated rows.
Tensor read_matrix_csv(const std::string& path);

}  // namespace syncmatrix::cli
