#include "syncmatrix/commands.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "syncmatrix/errors.hpp"
#include "syncmatrix/eval.hpp"
#include "syncmatrix/rng.hpp"
#include "syncmatrix/training.hpp"

namespace syncmatrix::cli {

namespace {

GenConfig gen_config_from(const RunConfig& cfg, std::uint64_t master_seed) {
    GenConfig g;
    g.latent_dim = cfg.get_size("gen.latent_dim", g.latent_dim);
    g.raw_dim_audio = cfg.get_size("gen.raw_dim_audio", g.raw_dim_audio);
    g.raw_dim_video = cfg.get_size("gen.raw_dim_video", g.raw_dim_video);
    g.frames = cfg.get_size("gen.frames", g.frames);
    g.noise_sigma = cfg.get_double("gen.noise_sigma", g.noise_sigma);
    g.occlusion_prob = cfg.get_double("gen.occlusion_prob", g.occlusion_prob);
    g.occlusion_len = cfg.get_size("gen.occlusion_len", g.occlusion_len);
    g.smoothness = cfg.get_double("gen.smoothness", g.smoothness);
    g.signal_scale = cfg.get_double("gen.signal_scale", g.signal_scale);
    g.seed = derive_seed(master_seed, "gen");
    return g;
}

EncoderConfig encoder_config_from(const RunConfig& cfg, const GenConfig& gen) {
    EncoderConfig e;
    e.context = cfg.get_size("encoder.context", e.context);
    e.embed_dim = cfg.get_size("encoder.embed_dim", e.embed_dim);
    e.raw_dim_audio = gen.raw_dim_audio;
    e.raw_dim_video = gen.raw_dim_video;
    e.hidden.clear();
    for (const std::string& h : cfg.get_list("encoder.hidden", {"64"}))
        e.hidden.push_back(std::stoul(h));
    return e;
}

TrainHyper hyper_from(const RunConfig& cfg, std::uint64_t master_seed, std::string_view tag) {
    TrainHyper h;
    h.lr = cfg.get_double("train.lr", h.lr);
    h.weight_decay = cfg.get_double("train.weight_decay", h.weight_decay);
    h.batch = cfg.get_size("train.batch", h.batch);
    h.epochs = cfg.get_size("train.epochs", h.epochs);
    h.patience = cfg.get_size("train.patience", h.patience);
    h.val_fraction = cfg.get_double("train.val_fraction", h.val_fraction);
    h.seed = derive_seed(master_seed, tag);
    return h;
}

void write_curve(const std::vector<TrainCurvePoint>& curve, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << "epoch,train_loss,val_metric\n";
    char buf[64];
    for (const auto& p : curve) {
        std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g", p.epoch, p.train_loss, p.val_metric);
        os << buf << '\n';
    }
}

void ensure_parent_dir(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

std::pair<std::vector<SimilarityMatrix>, std::vector<OffsetLabel>> extract_matrices(
    const Dataset& ds, const EncoderPair& enc) {
    std::vector<SimilarityMatrix> ms;
    std::vector<OffsetLabel> labels;
    ms.reserve(ds.size());
    labels.reserve(ds.size());
    for (const auto& clip : ds.clips) {
        ms.push_back(clip_similarity(enc, clip));
        labels.push_back(clip.truth);
    }
    return {std::move(ms), std::move(labels)};
}

}  // namespace

Tensor read_matrix_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "'");
    std::vector<double> values;
    std::size_t rows = 0, cols = 0;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::size_t c = 0;
        while (std::getline(ss, field, ',')) {
            try {
                values.push_back(std::stod(field));
            } catch (const std::exception&) {
                throw IoError(path + ": non-numeric CSV field '" + field + "'");
            }
            ++c;
        }
        if (rows == 0) cols = c;
        else if (c != cols) throw IoError(path + ": ragged CSV rows");
        ++rows;
    }
    if (rows == 0) throw IoError(path + ": empty feature file");
    return Tensor(Shape{rows, cols}, std::move(values));
}

void cmd_gen(const RunConfig& cfg) {
    const std::uint64_t master = cfg.get_u64("run.seed", 0);
    const GenConfig gen = gen_config_from(cfg, master);
    const std::size_t count = cfg.get_size("gen.count", 1100);
    const std::string out = cfg.require_string("paths.out");
    ensure_parent_dir(out);
    Dataset ds = generate_dataset(gen, count, derive_seed(master, "dataset"));
    save_dataset(ds, out);
    cfg.write_resolved(out + ".resolved.ini");
}

void cmd_train_embed(const RunConfig& cfg) {
    const std::uint64_t master = cfg.get_u64("run.seed", 0);
    Dataset ds = load_dataset(cfg.require_string("paths.dataset"));
    const EncoderConfig enc_cfg = encoder_config_from(cfg, ds.cfg);
    EncoderPair enc = EncoderPair::random_init(enc_cfg, derive_seed(master, "enc.init"));
    const EmbedObjective objective =
        embed_objective_from_string(cfg.get_string("train.objective", "angular"));
    const double margin = cfg.get_double("train.margin", 1.0);
    const TrainHyper hyper = hyper_from(cfg, master, "train.embed");
    const std::string out = cfg.require_string("paths.out");
    ensure_parent_dir(out);

    EmbedTrainResult res = train_embedding(ds.clips, enc, objective, hyper, margin);
    enc.save(out);
    write_curve(res.curve, out + ".curve.csv");
    cfg.write_resolved(out + ".resolved.ini");
}

void cmd_train_cls(const RunConfig& cfg) {
    const std::uint64_t master = cfg.get_u64("run.seed", 0);
    Dataset ds = load_dataset(cfg.require_string("paths.dataset"));
    EncoderPair enc = EncoderPair::load(cfg.require_string("paths.encoder"));
    const TrainHyper hyper = hyper_from(cfg, master, "train.cls");
    const std::string out = cfg.require_string("paths.out");
    ensure_parent_dir(out);

    auto [matrices, labels] = extract_matrices(ds, enc);
    const std::size_t n = matrices.front().n;
    ClsTrainResult res = train_synccls(matrices, labels, n, hyper);
    res.net.save(out);
    write_curve(res.curve, out + ".curve.csv");
    cfg.write_resolved(out + ".resolved.ini");
}

void cmd_train_e2e(const RunConfig& cfg) {
    const std::uint64_t master = cfg.get_u64("run.seed", 0);
    Dataset ds = load_dataset(cfg.require_string("paths.dataset"));
    EncoderPair enc = EncoderPair::load(cfg.require_string("paths.encoder"));
    SyncClsNet net = SyncClsNet::load(cfg.require_string("paths.classifier"));
    const TrainHyper hyper = hyper_from(cfg, master, "train.e2e");
    const std::string out = cfg.require_string("paths.out");
    ensure_parent_dir(out);

    auto curve = train_synce2e(ds.clips, enc, net, hyper);
    Checkpoint joint;
    enc.save_into(joint);
    net.save_into(joint);
    joint.save(out);
    write_curve(curve, out + ".curve.csv");
    cfg.write_resolved(out + ".resolved.ini");
}

void cmd_eval(const RunConfig& cfg) {
    const std::uint64_t master = cfg.get_u64("run.seed", 0);
    BenchmarkPlan plan;
    plan.gen = gen_config_from(cfg, master);
    plan.trials = cfg.get_size("eval.trials", 10);
    plan.clips_per_trial = cfg.get_size("eval.clips_per_trial", 1100);
    plan.seed = derive_seed(master, "eval");
    plan.methods.clear();
    for (const std::string& m :
         cfg.get_list("eval.methods", {"baseline", "diag-avg", "sync-cls", "sync-e2e"}))
        plan.methods.push_back(method_from_string(m));
    plan.frame_lengths.clear();
    for (const std::string& f : cfg.get_list("eval.frames", {"11", "13", "15", "20"}))
        plan.frame_lengths.push_back(std::stoul(f));

    const bool reference_encoders = cfg.get_bool("encoder.reference", false);
    const std::size_t context = cfg.get_size("encoder.context", 5);

    std::map<std::size_t, ModelSet> models;
    for (std::size_t frames : plan.frame_lengths) {
        ModelSet ms;
        const std::string suffix = "_" + std::to_string(frames);
        if (reference_encoders) {
            GenConfig g = plan.gen;
            g.frames = frames;
            ms.encoders = ClipGenerator(g).reference_encoders(context);
        } else if (cfg.has("models.encoder" + suffix)) {
            ms.encoders = EncoderPair::load(cfg.require_string("models.encoder" + suffix));
        }
        if (cfg.has("models.classifier" + suffix))
            ms.cls = SyncClsNet::load(cfg.require_string("models.classifier" + suffix));
        if (cfg.has("models.e2e" + suffix)) {
            const Checkpoint joint = Checkpoint::load(cfg.require_string("models.e2e" + suffix));
            ms.e2e_encoders = EncoderPair::load_from(joint);
            ms.e2e_cls = SyncClsNet::load_from(joint);
        }
        models.emplace(frames, std::move(ms));
    }

    const std::string out_dir = cfg.require_string("paths.out_dir");
    std::filesystem::create_directories(out_dir);
    const EvalReport report = run_benchmark(plan, models);
    write_report_csv(report, out_dir + "/report.csv");
    std::ofstream table(out_dir + "/report.txt");
    if (!table) throw IoError("cannot open report.txt for writing");
    table << format_report_table(report);
    cfg.write_resolved(out_dir + "/eval.resolved.ini");
}

void cmd_infer(const std::string& audio_csv, const std::string& video_csv,
               const std::string& method_str, const std::string& model_path, std::ostream& out) {
    const Method method = method_from_string(method_str);
    FeatureStream audio{Modality::audio, read_matrix_csv(audio_csv)};
    FeatureStream visual{Modality::visual, read_matrix_csv(video_csv)};

    OffsetLabel result;
    if (method == Method::baseline) {
        result = sliding_window_offset(audio, visual).offset;
    } else if (method == Method::diag_avg) {
        result = diag_avg_offset(build_similarity_matrix(audio, visual)).offset;
    } else {
        if (model_path.empty())
            throw ConfigError("infer: --model is required for classifier methods");
        const SyncClsNet net = SyncClsNet::load(model_path);
        result = net.predict(build_similarity_matrix(audio, visual)).offset;
    }
    out << result.offset << '\n';
}

void cmd_saliency(const RunConfig& cfg) {
    Dataset ds = load_dataset(cfg.require_string("paths.dataset"));
    const std::size_t clip_id = cfg.get_size("saliency.clip_id", 0);
    if (clip_id >= ds.size()) throw ArgumentError("saliency: clip_id out of range");
    const SyntheticClip& clip = ds.clips[clip_id];

    EncoderPair enc;
    SyncClsNet net;
    if (cfg.has("paths.model")) {
        const Checkpoint joint = Checkpoint::load(cfg.require_string("paths.model"));
        enc = EncoderPair::load_from(joint);
        net = SyncClsNet::load_from(joint);
    } else {
        enc = EncoderPair::load(cfg.require_string("paths.encoder"));
        net = SyncClsNet::load(cfg.require_string("paths.classifier"));
    }

    const int klass = static_cast<int>(
        cfg.get_size("saliency.class", static_cast<std::size_t>(clip.truth.class_index())));
    const SimilarityMatrix m = clip_similarity(enc, clip);
    const std::vector<double> grad = net.saliency(m, klass);

    const std::string out_dir = cfg.require_string("paths.out_dir");
    std::filesystem::create_directories(out_dir);
    const std::string stem = out_dir + "/clip" + std::to_string(clip_id);
    write_matrix_csv(m, stem + ".sim.csv");
    write_matrix_pgm(m, stem + ".sim.pgm");
    write_values_csv(grad, m.n, m.n, stem + ".saliency.csv");
    write_signed_pgm(grad, m.n, stem + ".saliency.pgm");
    cfg.write_resolved(stem + ".saliency.resolved.ini");
}

}  // namespace syncmatrix::cli
