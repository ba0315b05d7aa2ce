#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "syncmatrix/commands.hpp"
#include "syncmatrix/errors.hpp"
#include "syncmatrix/parallel.hpp"

namespace {

using syncmatrix::RunConfig;

// --section.key=value tokens left over after CLI11 parsing become overrides
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& extras) {
    for (const std::string& tok : extras) {
        if (tok.rfind("--", 0) != 0)
            throw syncmatrix::ConfigError("unexpected argument '" + tok + "'");
        const auto eq = tok.find('=');
        if (eq == std::string::npos || tok.find('.') == std::string::npos || eq < 3)
            throw syncmatrix::ConfigError("override must look like --section.key=value: '" +
                                          tok + "'");
        cfg.set(tok.substr(2, eq - 2), tok.substr(eq + 1));
    }
}

void setup_workers(const RunConfig& cfg, std::size_t flag_workers) {
    std::size_t workers = flag_workers;
    if (workers == 0) {
        if (const char* env = std::getenv("SYNCMATRIX_WORKERS"))
            workers = static_cast<std::size_t>(std::strtoull(env, nullptr, 10));
    }
    if (workers == 0) workers = cfg.get_size("run.workers", 0);
    syncmatrix::runtime::set_workers(workers);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"syncmatrix: audio-visual offset estimation on similarity matrices"};
    app.require_subcommand(1);

    std::string config_path;
    std::size_t workers = 0;

    struct ConfigCmd {
        CLI::App* sub;
        void (*run)(const RunConfig&);
    };
    std::vector<ConfigCmd> cmds;
    auto add_cmd = [&](const char* name, const char* desc, void (*run)(const RunConfig&)) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", config_path, "INI configuration file");
        sub->add_option("--workers", workers, "worker thread cap");
        sub->allow_extras();
        cmds.push_back({sub, run});
    };

    add_cmd("gen", "generate a synthetic paired-stream dataset", syncmatrix::cli::cmd_gen);
    add_cmd("train-embed", "train the cross-modal embedding encoders",
            syncmatrix::cli::cmd_train_embed);
    add_cmd("train-cls", "train the similarity-matrix pattern classifier",
            syncmatrix::cli::cmd_train_cls);
    add_cmd("train-e2e", "jointly fine-tune encoders and classifier",
            syncmatrix::cli::cmd_train_e2e);
    add_cmd("eval", "run the repeated-trial benchmark", syncmatrix::cli::cmd_eval);
    add_cmd("saliency", "export similarity and input-gradient maps",
            syncmatrix::cli::cmd_saliency);

    CLI::App* infer = app.add_subcommand("infer", "estimate the offset of one feature pair");
    std::string audio_csv, video_csv, method = "diag-avg", model_path;
    infer->add_option("audio", audio_csv, "audio feature CSV (N x D)")->required();
    infer->add_option("video", video_csv, "video feature CSV (N x D)")->required();
    infer->add_option("--method", method, "baseline | diag-avg | sync-cls | sync-e2e");
    infer->add_option("--model", model_path, "classifier checkpoint (classifier methods)");
    infer->add_option("--workers", workers, "worker thread cap");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (infer->parsed()) {
            syncmatrix::runtime::set_workers(workers);
            syncmatrix::cli::cmd_infer(audio_csv, video_csv, method, model_path, std::cout);
            return 0;
        }
        for (const auto& cmd : cmds) {
            if (!cmd.sub->parsed()) continue;
            RunConfig cfg = config_path.empty() ? RunConfig() : RunConfig::from_file(config_path);
            apply_overrides(cfg, cmd.sub->remaining());
            setup_workers(cfg, workers);
            cmd.run(cfg);
            return 0;
        }
        std::cerr << "error: no command selected\n";
        return 2;
    } catch (const syncmatrix::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const syncmatrix::ArgumentError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const syncmatrix::DimensionError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const syncmatrix::IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return 3;
    } catch (const syncmatrix::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
}
