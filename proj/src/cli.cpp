#include "updd/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "updd/config.hpp"
#include "updd/data.hpp"
#include "updd/errors.hpp"
#include "updd/inference.hpp"
#include "updd/svg.hpp"
#include "updd/training.hpp"

namespace updd {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct DataOptions {
    std::string source;  // "synthetic" or a directory of benchmark files
    int scenes = 20;
    int peds = 8;
    int frames = 40;
    uint64_t seed = 1;
    std::string test_scene;  // empty: first scene; "none": train on everything
    int stride = 1;
    double radius = 5.0;
    int max_peds = 32;
};

json data_json(const DataOptions& d) {
    return {{"source", d.source}, {"scenes", d.scenes}, {"peds", d.peds}, {"frames", d.frames},
            {"seed", d.seed},     {"stride", d.stride}, {"radius", d.radius}, {"max_peds", d.max_peds}};
}

DataOptions data_from_json(const json& j) {
    DataOptions d;
    d.source = j.at("source");
    d.scenes = j.at("scenes");
    d.peds = j.at("peds");
    d.frames = j.at("frames");
    d.seed = j.at("seed");
    d.stride = j.at("stride");
    d.radius = j.at("radius");
    d.max_peds = j.at("max_peds");
    return d;
}

std::string default_data_source() {
    const char* env = std::getenv(kDataDirEnv);
    return env && *env ? env : "synthetic";
}

SynthConfig synth_config(const DataOptions& d) {
    SynthConfig s;
    s.n_scenes = d.scenes;
    s.peds_per_scene = d.peds;
    s.frames = d.frames;
    s.seed = d.seed;
    return s;
}

std::vector<RawTrack> load_tracks(const DataOptions& d) {
    if (d.source == "synthetic") return synthesize_scenes(synth_config(d));
    const fs::path dir(d.source);
    if (!fs::is_directory(dir)) throw DataError("data source '" + d.source + "' is neither 'synthetic' nor a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no .txt benchmark files in " + d.source);
    std::vector<RawTrack> tracks;
    for (const auto& f : files) {
        auto t = ingest_benchmark_file(f, f.stem().string());
        tracks.insert(tracks.end(), t.begin(), t.end());
    }
    return tracks;
}

WindowConfig window_config(const DataOptions& d, const ModelConfig& m) {
    WindowConfig w;
    w.T = m.T;
    w.T_future = m.T_future;
    w.stride = d.stride;
    w.neighbor_radius = d.radius;
    w.max_peds = d.max_peds;
    return w;
}

// Resolves the held-out scene name against the available scenes.
std::string resolve_test_scene(const std::string& requested, const std::vector<std::string>& names) {
    if (requested == "none") return "";
    if (requested.empty()) return names.size() >= 2 ? names.front() : "";
    if (std::find(names.begin(), names.end(), requested) == names.end())
        throw DataError("test scene '" + requested + "' not found in the data");
    return requested;
}

void add_data_options(CLI::App* app, DataOptions& d) {
    app->add_option("--data", d.source, "'synthetic' or a directory of benchmark .txt files (default $UPDD_DATA_DIR)");
    app->add_option("--scenes", d.scenes, "synthetic scenes")->check(CLI::PositiveNumber);
    app->add_option("--peds", d.peds, "synthetic pedestrians per scene")->check(CLI::PositiveNumber);
    app->add_option("--frames", d.frames, "synthetic frames per scene")->check(CLI::PositiveNumber);
    app->add_option("--data-seed", d.seed, "synthetic generator seed");
    app->add_option("--test-scene", d.test_scene, "held-out scene ('none' trains on all)");
    app->add_option("--stride", d.stride, "window stride in frames")->check(CLI::PositiveNumber);
    app->add_option("--radius", d.radius, "neighbor radius in meters")->check(CLI::PositiveNumber);
    app->add_option("--max-peds", d.max_peds, "pedestrian cap per window")->check(CLI::PositiveNumber);
}

bool data_flags_given(const CLI::App* app) {
    for (const char* f : {"--data", "--scenes", "--peds", "--frames", "--data-seed", "--stride", "--radius", "--max-peds"})
        if (app->count(f) > 0) return true;
    return false;
}

struct ProtocolOptions {
    std::string strategy = "A";
    int r1 = 10;
    int r2 = 10;
    int r = 0;  // 0: match strategy A's candidate count
    std::string selection = "gt-ade";
    std::string accounting = "post";
    int budget = 0;
    int steps = 0;
    std::string gamma;
    uint64_t seed = 0;
    int64_t chain_seed = -1;
    size_t max_windows = 0;
    bool oracle = false;
};

void add_protocol_options(CLI::App* app, ProtocolOptions& p) {
    app->add_option("--strategy", p.strategy, "sampling strategy A, B or C");
    app->add_option("--r1", p.r1, "strategy A reverse runs")->check(CLI::PositiveNumber);
    app->add_option("--r2", p.r2, "strategy A Gaussian draws")->check(CLI::NonNegativeNumber);
    app->add_option("--r", p.r, "strategy B/C candidates (default: strategy A's count)")->check(CLI::NonNegativeNumber);
    app->add_option("--selection", p.selection, "gt-ade or self-likelihood");
    app->add_option("--accounting", p.accounting, "strategy A Best-of-N accounting: post or all");
    app->add_option("--budget", p.budget, "cap on candidates per pedestrian (0 = none)");
    app->add_option("--steps", p.steps, "reverse steps S (default: checkpoint's)");
    app->add_option("--gamma", p.gamma, "deterministic or ddpm-matching (default: checkpoint's)");
    app->add_option("--seed", p.seed, "sampling seed");
    app->add_option("--chain-seed", p.chain_seed, "seed of the per-step noise when gamma > 0");
    app->add_option("--max-windows", p.max_windows, "evaluate at most this many windows (0 = all)");
    app->add_flag("--oracle", p.oracle, "inject ground truth as a candidate")->group("");
}

EvalProtocol make_protocol(const ProtocolOptions& p) {
    EvalProtocol e;
    e.sampling.strategy = parse_strategy(p.strategy);
    e.sampling.r1 = p.r1;
    e.sampling.r2 = p.r2;
    e.sampling.selection = parse_selection(p.selection);
    e.sampling.accounting = parse_accounting(p.accounting);
    e.sampling.budget = p.budget;
    SamplingConfig a = e.sampling;
    a.strategy = Strategy::A;
    e.sampling.r = p.r > 0 ? p.r : a.candidates();
    e.steps = p.steps;
    if (!p.gamma.empty()) e.gamma = parse_gamma_mode(p.gamma);
    e.seed = p.seed;
    if (p.chain_seed >= 0) e.chain_seed = static_cast<uint64_t>(p.chain_seed);
    e.inject_oracle = p.oracle;
    e.max_windows = p.max_windows;
    return e;
}

std::string protocol_label(const EvalProtocol& e, const Schedule& s) {
    std::ostringstream os;
    os << "strategy=" << strategy_name(e.sampling.strategy);
    if (e.sampling.strategy == Strategy::A)
        os << " r1=" << e.sampling.r1 << " r2=" << e.sampling.r2 << " selection=" << selection_name(e.sampling.selection)
           << " accounting=" << accounting_name(e.sampling.accounting);
    else
        os << " r=" << e.sampling.r;
    os << " S=" << s.S() << " K=" << s.K << " gamma=" << gamma_mode_name(s.gamma_mode) << " seed=" << e.seed;
    return os.str();
}

// Applies `key = value` entries to options the command line left unset.
void apply_config(CLI::App* app, const std::vector<ConfigEntry>& entries, const std::string& source) {
    for (const auto& e : entries) {
        CLI::Option* opt = app->get_option_no_throw("--" + e.key);
        if (opt == nullptr || e.key == "config")
            throw UsageError(source + ":" + std::to_string(e.line) + ": unknown config key '" +
                             (e.section.empty() ? "" : e.section + ".") + e.key + "'");
        if (opt->count() > 0) continue;
        if (opt->get_type_size() == 0) {
            const std::string v = CLI::detail::to_lower(e.value);
            if (v == "true" || v == "1" || v == "yes" || v == "on") opt->add_result("true");
            else if (!(v == "false" || v == "0" || v == "no" || v == "off"))
                throw UsageError(source + ":" + std::to_string(e.line) + ": '" + e.key + "' expects true/false");
            else continue;
        } else {
            opt->add_result(e.value);
        }
        opt->run_callback();
    }
}

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string exact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_metrics(const fs::path& path, const EvalReport& r, const json& meta) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    for (auto it = meta.begin(); it != meta.end(); ++it)
        out << "# " << it.key() << "=" << (it->is_string() ? it->get<std::string>() : it->dump()) << "\n";
    out << "scene,N_protocol,ADE,FDE,windows,pedestrians\n";
    int windows = 0, peds = 0;
    for (const auto& s : r.scenes) {
        out << s.scene << ',' << r.candidates << ',' << exact(s.ade) << ',' << exact(s.fde) << ',' << s.windows << ','
            << s.pedestrians << "\n";
        windows += s.windows;
        peds += s.pedestrians;
    }
    out << "AVG," << r.candidates << ',' << exact(r.avg_ade) << ',' << exact(r.avg_fde) << ',' << windows << ',' << peds
        << "\n";

    json summary = meta;
    summary["scenes"] = json::array();
    for (const auto& s : r.scenes)
        summary["scenes"].push_back(
            {{"scene", s.scene}, {"ade", s.ade}, {"fde", s.fde}, {"windows", s.windows}, {"pedestrians", s.pedestrians}});
    summary["avg"] = {{"ade", r.avg_ade}, {"fde", r.avg_fde}};
    summary["candidates"] = r.candidates;
    fs::path js = path;
    js.replace_extension(".json");
    std::ofstream(js) << summary.dump(2) << "\n";
}

void print_table(std::ostream& out, const EvalReport& r) {
    out << std::left << std::setw(16) << "scene" << "ADE/FDE (m)\n";
    for (const auto& s : r.scenes) out << std::setw(16) << s.scene << fmt(s.ade, 2) << "/" << fmt(s.fde, 2) << "\n";
    out << std::setw(16) << "AVG" << fmt(r.avg_ade, 2) << "/" << fmt(r.avg_fde, 2) << "\n";
}

struct LoadedCheckpoint {
    Model model;
    json meta;
    std::string hash;
};

LoadedCheckpoint load_checkpoint(const std::string& path) {
    if (!fs::exists(path)) throw DataError("checkpoint not found: " + path);
    const Container c = Container::load(path);
    return {Model::load(c), c.metadata(), file_hash(path)};
}

// Held-out windows for a checkpoint: its own data block unless data flags override.
std::vector<SceneWindow> test_windows(const CLI::App* app, DataOptions data, const LoadedCheckpoint& ck) {
    std::string test_scene = data.test_scene;
    if (!data_flags_given(app) && ck.meta.contains("data")) data = data_from_json(ck.meta["data"]);
    if (data.source.empty()) data.source = default_data_source();
    if (test_scene.empty()) test_scene = ck.meta.value("test_scene", std::string());
    const auto tracks = load_tracks(data);
    test_scene = resolve_test_scene(test_scene, scene_names(tracks));
    const auto scenes = test_scene.empty() ? scene_names(tracks) : std::vector<std::string>{test_scene};
    auto windows = window_scenes(tracks_in(tracks, scenes), window_config(data, ck.model.config));
    if (windows.empty()) throw DataError("no evaluation windows in scene(s) " + test_scene);
    return windows;
}

int cmd_synth(const DataOptions& d, const std::string& out_dir, std::ostream& out) {
    fs::create_directories(out_dir);
    const auto tracks = synthesize_scenes(synth_config(d));
    for (const auto& name : scene_names(tracks)) {
        const fs::path p = fs::path(out_dir) / (name + ".txt");
        write_benchmark_file(tracks_in(tracks, {name}), p);
        out << "wrote " << p.string() << "\n";
    }
    return kExitOk;
}

struct TrainOptions {
    TrainConfig config;
    std::string out_dir = "updd_run";
    std::string resume;
    std::string gamma = "deterministic";
};

void add_train_options(CLI::App* app, TrainOptions& t) {
    TrainConfig& c = t.config;
    app->add_option("--out", t.out_dir, "output directory");
    app->add_option("--epochs", c.epochs, "training epochs")->check(CLI::PositiveNumber);
    app->add_option("--max-steps", c.max_steps, "stop after this many steps (0 = no cap)");
    app->add_option("--batch", c.batch_size, "windows per batch")->check(CLI::PositiveNumber);
    app->add_option("--lr", c.lr, "learning rate");
    app->add_option("--clip", c.clip_norm, "global gradient-norm clip");
    app->add_option("--lambda1", c.lambda1, "diffusion loss weight");
    app->add_option("--lambda2", c.lambda2, "likelihood loss weight");
    app->add_option("--lambda3", c.lambda3, "consistency loss weight");
    app->add_option("--seed", c.seed, "training seed");
    app->add_option("--K", c.K, "diffusion steps K");
    app->add_option("--S", c.S, "reverse steps S stored in the checkpoint");
    app->add_option("--beta-start", c.beta_start, "first beta");
    app->add_option("--beta-end", c.beta_end, "last beta");
    app->add_option("--gamma", t.gamma, "deterministic or ddpm-matching");
    app->add_option("--checkpoint-every", c.checkpoint_every, "checkpoint cadence in steps (0 = final only)");
    app->add_option("--resume", t.resume, "continue from a checkpoint");
    app->add_flag("--log-timing", c.log_timing, "record wall-clock ms per step in the log");
    app->add_option("--enc-channels", c.model.enc_channels, "encoder conv channels");
    app->add_option("--d-history", c.model.d_history, "history embedding width");
    app->add_option("--d-neighbor", c.model.d_neighbor, "neighbor embedding width");
    app->add_option("--conv-hidden", c.model.conv_hidden, "converter hidden channels");
    app->add_option("--step-embed", c.model.step_embed, "step embedding width");
    app->add_option("--denoiser-width", c.model.denoiser_width, "denoiser width");
    app->add_option("--denoiser-blocks", c.model.denoiser_blocks, "denoiser residual blocks");
}

int cmd_train(TrainOptions& t, DataOptions d, std::ostream& out) {
    t.config.gamma_mode = parse_gamma_mode(t.gamma);
    t.config.validate();
    if (d.source.empty()) d.source = default_data_source();
    const auto tracks = load_tracks(d);
    const auto names = scene_names(tracks);
    const std::string test = resolve_test_scene(d.test_scene, names);
    std::vector<std::string> train_names;
    for (const auto& n : names)
        if (n != test) train_names.push_back(n);
    const auto windows = window_scenes(tracks_in(tracks, train_names), window_config(d, t.config.model));
    if (windows.empty()) throw DataError("no training windows");

    FitOptions fo;
    fo.out_dir = t.out_dir;
    if (!t.resume.empty()) fo.resume = t.resume;
    fo.extra_metadata = {{"data", data_json(d)}, {"test_scene", test}, {"train_scenes", train_names}};
    out << "training on " << windows.size() << " windows from " << train_names.size() << " scene(s)"
        << (test.empty() ? "" : ", holding out " + test) << ", " << total_steps(windows.size(), t.config)
        << " steps\n";
    const FitResult r = fit(windows, t.config, fo);
    out << "step " << r.steps << " total=" << fmt(r.last.total) << " diffusion=" << fmt(r.last.diffusion)
        << " likelihood=" << fmt(r.last.likelihood) << " consistency=" << fmt(r.last.consistency) << "\n";
    out << "checkpoint " << r.checkpoint.string() << "\nlog " << r.log.string() << "\n";
    return kExitOk;
}

json eval_meta(const LoadedCheckpoint& ck, const std::string& path, const EvalProtocol& e, const Schedule& s) {
    return {{"checkpoint", path},
            {"checkpoint_hash", ck.hash},
            {"seed", e.seed},
            {"protocol", protocol_label(e, s)}};
}

int cmd_eval(const CLI::App* app, const std::string& ckpt, const DataOptions& d, const ProtocolOptions& p,
             const std::string& out_path, bool baseline, std::ostream& out) {
    const auto ck = load_checkpoint(ckpt);
    const EvalProtocol e = make_protocol(p);
    const Schedule s = protocol_schedule(ck.model, e);
    const auto windows = test_windows(app, d, ck);
    const EvalReport r = evaluate_best_of_n(ck.model, windows, e);
    write_metrics(out_path, r, eval_meta(ck, ckpt, e, s));
    out << protocol_label(e, s) << " candidates=" << r.candidates << "\n";
    print_table(out, r);
    if (baseline) {
        const EvalReport cv = evaluate_constant_velocity(windows);
        out << std::left << std::setw(16) << "const-velocity" << fmt(cv.avg_ade, 2) << "/" << fmt(cv.avg_fde, 2) << "\n";
    }
    out << "metrics " << out_path << "\n";
    return kExitOk;
}

int cmd_ablate(const CLI::App* app, const std::string& ckpt, const std::string& axis, const DataOptions& d,
               const ProtocolOptions& p, const std::string& out_path, std::ostream& out) {
    if (axis != "steps" && axis != "sampling" && axis != "gamma")
        throw UsageError("unknown ablation axis '" + axis + "' (expected steps, sampling or gamma)");
    const auto ck = load_checkpoint(ckpt);
    const auto windows = test_windows(app, d, ck);
    const EvalProtocol base = make_protocol(p);

    std::vector<std::pair<std::string, EvalProtocol>> settings;
    if (axis == "steps") {
        for (int S : {10, 25, 50, 100})
            if (S <= ck.model.schedule.K) {
                EvalProtocol e = base;
                e.steps = S;
                settings.emplace_back("S=" + std::to_string(S), e);
            }
    } else if (axis == "sampling") {
        for (Strategy st : {Strategy::A, Strategy::B, Strategy::C}) {
            EvalProtocol e = base;
            e.sampling.strategy = st;
            settings.emplace_back(std::string(strategy_name(st)), e);
        }
    } else {
        for (GammaMode g : {GammaMode::Deterministic, GammaMode::DdpmMatching}) {
            EvalProtocol e = base;
            e.gamma = g;
            settings.emplace_back(std::string(gamma_mode_name(g)), e);
        }
    }

    if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
    std::ofstream csv(out_path);
    if (!csv) throw DataError("cannot write " + out_path);
    csv << "# checkpoint=" << ckpt << "\n# axis=" << axis << "\n";
    csv << "axis,setting,protocol,candidates,ADE,FDE,checkpoint_hash,seed\n";
    out << std::left << std::setw(16) << "setting" << std::setw(14) << "ADE/FDE (m)" << "ms\n";
    for (const auto& [name, e] : settings) {
        const Schedule s = protocol_schedule(ck.model, e);
        const auto t0 = std::chrono::steady_clock::now();
        const EvalReport r = evaluate_best_of_n(ck.model, windows, e);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        csv << axis << ',' << name << ",\"" << protocol_label(e, s) << "\"," << r.candidates << ',' << exact(r.avg_ade)
            << ',' << exact(r.avg_fde) << ',' << ck.hash << ',' << e.seed << "\n";
        out << std::setw(16) << name << std::setw(14) << (fmt(r.avg_ade, 3) + "/" + fmt(r.avg_fde, 3)) << fmt(ms, 0)
            << "\n";
    }
    out << "ablation " << out_path << "\n";
    return kExitOk;
}

// Builds one window per group of pedestrians whose observation ends on the same frame.
std::vector<SceneWindow> prediction_windows(const std::vector<RawTrack>& tracks, const ModelConfig& mc, double radius,
                                            bool with_gt, std::ostream& err) {
    const int need = mc.T + (with_gt ? mc.T_future : 0);
    std::map<std::pair<std::string, int64_t>, std::vector<std::pair<const RawTrack*, size_t>>> groups;
    for (const auto& t : tracks) {
        if (static_cast<int>(t.size()) < need) {
            err << "ped " << t.ped_id << ": " << t.size() << " frame(s), need " << need << "; skipped\n";
            continue;
        }
        const size_t begin = t.size() - need;
        bool uniform = true;
        for (size_t i = begin + 2; i < t.size(); ++i)
            if (t.frames[i] - t.frames[i - 1] != t.frames[begin + 1] - t.frames[begin]) uniform = false;
        if (!uniform) {
            err << "ped " << t.ped_id << ": frames are not evenly spaced; skipped\n";
            continue;
        }
        groups[{t.scene_id, t.frames[begin + mc.T - 1]}].push_back({&t, begin});
    }
    std::vector<SceneWindow> windows;
    for (const auto& [key, members] : groups) {
        SceneWindow w;
        w.scene_id = key.first;
        w.start_frame = members.front().first->frames[members.front().second];
        w.N = static_cast<int>(members.size());
        w.T = mc.T;
        w.T_future = mc.T_future;
        for (const auto& [t, begin] : members) {
            w.ped_ids.push_back(t->ped_id);
            for (int i = 0; i < mc.T; ++i) {
                const Vec2 a = t->positions[begin + std::max(i - 1, 0)], b = t->positions[begin + i];
                w.observed.push_back(static_cast<float>(b.x - a.x));
                w.observed.push_back(static_cast<float>(b.y - a.y));
            }
            const Vec2 o = t->positions[begin + mc.T - 1];
            w.origin.push_back(o.x);
            w.origin.push_back(o.y);
            for (int i = 0; i < mc.T_future; ++i) {
                if (!with_gt) {
                    w.future.push_back(0.f), w.future.push_back(0.f);
                    continue;
                }
                const Vec2 a = t->positions[begin + mc.T - 1 + i], b = t->positions[begin + mc.T + i];
                w.future.push_back(static_cast<float>(b.x - a.x));
                w.future.push_back(static_cast<float>(b.y - a.y));
            }
        }
        w.neighbor_mask = neighbor_sets(w, radius);
        windows.push_back(std::move(w));
    }
    return windows;
}

int cmd_predict(const std::string& ckpt, const std::string& input, const std::string& out_path,
                const std::string& plot, bool with_gt, double radius, ProtocolOptions p, bool selection_given,
                std::ostream& out, std::ostream& err) {
    const auto ck = load_checkpoint(ckpt);
    if (!selection_given && !with_gt) p.selection = "self-likelihood";
    const EvalProtocol e = make_protocol(p);
    const Schedule s = protocol_schedule(ck.model, e);
    if (!fs::exists(input)) throw DataError("input file not found: " + input);
    const auto tracks = ingest_benchmark_file(input, fs::path(input).stem().string());
    const auto windows = prediction_windows(tracks, ck.model.config, radius, with_gt, err);
    if (windows.empty()) throw DataError("no pedestrian in " + input + " has enough frames");

    if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
    std::ofstream csv(out_path);
    if (!csv) throw DataError("cannot write " + out_path);
    csv << "# checkpoint_hash=" << ck.hash << "\n# seed=" << e.seed << "\n# protocol=" << protocol_label(e, s) << "\n";
    csv << "scene,ped,candidate,t,x,y\n";
    std::vector<PlotPanel> panels;
    int written = 0;
    for (size_t i = 0; i < windows.size(); ++i) {
        const auto& w = windows[i];
        const auto gt = ground_truth(w);
        SampleOptions opt{e.sampling, window_seed(e.seed, i), std::nullopt};
        if (e.chain_seed) opt.chain_seed = window_seed(*e.chain_seed, i);
        const PredictionSet set = hybrid_sample(ck.model, s, w, opt, with_gt ? &gt : nullptr);
        PlotPanel panel;
        panel.title = w.scene_id + " frame " + std::to_string(w.start_frame);
        for (int n = 0; n < set.N; ++n) {
            for (int m = 0; m < set.M; ++m) {
                auto c = set.candidate(n, m);
                for (int t = 0; t < set.T_future; ++t)
                    csv << w.scene_id << ',' << w.ped_ids[n] << ',' << m << ',' << t + 1 << ',' << exact(c[t].x) << ','
                        << exact(c[t].y) << "\n";
                std::vector<Vec2> line{{w.origin[2 * n], w.origin[2 * n + 1]}};
                line.insert(line.end(), c.begin(), c.end());
                panel.lines.push_back({line, "#1f77b4", 1.0, false, 0.5});
                ++written;
            }
            panel.lines.push_back({w.observed_absolute(n), "#000000", 2.0, false, 1.0});
            if (with_gt) {
                std::vector<Vec2> line{{w.origin[2 * n], w.origin[2 * n + 1]}};
                line.insert(line.end(), gt[n].begin(), gt[n].end());
                panel.lines.push_back({line, "#2ca02c", 2.0, true, 1.0});
            }
        }
        panels.push_back(std::move(panel));
    }
    out << "wrote " << written << " candidate trajectories to " << out_path << "\n";
    if (!plot.empty()) {
        write_svg(plot, panels);
        out << "plot " << plot << "\n";
    }
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"UPDD: pedestrian trajectory prediction by diffusion over Gaussian statistics", "updd"};
    app.require_subcommand(1);

    DataOptions data;
    TrainOptions train_opts;
    ProtocolOptions proto;
    std::string config_path, checkpoint, out_path, axis, input, plot, synth_out = "synthetic_data";
    bool with_gt = false, baseline = false;

    auto* synth = app.add_subcommand("synth", "write synthetic scenes as benchmark files");
    synth->add_option("--out", synth_out, "output directory");
    add_data_options(synth, data);

    auto* train = app.add_subcommand("train", "fit a model");
    train->add_option("--config", config_path, "key = value config file; flags override it");
    add_data_options(train, data);
    add_train_options(train, train_opts);

    auto* eval = app.add_subcommand("eval", "Best-of-N ADE/FDE on the held-out scene");
    eval->add_option("--config", config_path, "key = value config file; flags override it");
    eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    eval->add_option("--out", out_path, "metrics CSV")->default_val("metrics.csv");
    eval->add_flag("--baseline", baseline, "also report constant-velocity extrapolation");
    add_data_options(eval, data);
    add_protocol_options(eval, proto);

    auto* ablate = app.add_subcommand("ablate", "sweep one protocol axis");
    ablate->add_option("--config", config_path, "key = value config file; flags override it");
    ablate->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    ablate->add_option("--axis", axis, "steps, sampling or gamma")->required();
    ablate->add_option("--out", out_path, "comparison CSV")->default_val("ablation.csv");
    add_data_options(ablate, data);
    add_protocol_options(ablate, proto);

    auto* predict = app.add_subcommand("predict", "predict candidate futures for a benchmark file");
    predict->add_option("--config", config_path, "key = value config file; flags override it");
    predict->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    predict->add_option("--input", input, "benchmark-format input file")->required();
    predict->add_option("--out", out_path, "predictions CSV")->default_val("predictions.csv");
    predict->add_option("--plot", plot, "also write an SVG plot here");
    predict->add_flag("--with-gt", with_gt, "treat each pedestrian's last 12 frames as ground truth");
    predict->add_option("--radius", data.radius, "neighbor radius in meters")->check(CLI::PositiveNumber);
    add_protocol_options(predict, proto);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
        CLI::App* cmd = app.get_subcommands().front();
        if (!config_path.empty()) apply_config(cmd, read_config_file(config_path), config_path);

        if (cmd == synth) return cmd_synth(data, synth_out, out);
        if (cmd == train) return cmd_train(train_opts, data, out);
        if (cmd == eval) return cmd_eval(cmd, checkpoint, data, proto, out_path, baseline, out);
        if (cmd == ablate) return cmd_ablate(cmd, checkpoint, axis, data, proto, out_path, out);
        if (cmd == predict)
            return cmd_predict(checkpoint, input, out_path, plot, with_gt, data.radius, proto,
                               predict->count("--selection") > 0, out, err);
        return kExitUsage;
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        if (!app.get_subcommands().empty()) err << app.get_subcommands().front()->help();
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
}

}  // namespace updd
