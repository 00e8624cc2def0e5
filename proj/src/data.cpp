#include "updd/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "updd/checkpoint.hpp"
#include "updd/errors.hpp"

namespace updd {

namespace {

bool parse_number(const std::string& token, double& out) {
    try {
        size_t used = 0;
        out = std::stod(token, &used);
        return used == token.size() && std::isfinite(out);
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace

std::vector<RawTrack> parse_benchmark(std::istream& in, const std::string& scene_id, const std::string& source) {
    std::map<int64_t, std::map<int64_t, Vec2>> by_ped;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream fields(line);
        std::vector<std::string> tokens;
        for (std::string tok; fields >> tok;) tokens.push_back(tok);
        if (tokens.empty()) continue;
        auto fail = [&](const std::string& why) {
            throw DataError(source + ":" + std::to_string(line_no) + ": " + why);
        };
        if (tokens.size() != 4) fail("expected 4 fields `frame_id ped_id x y`, got " + std::to_string(tokens.size()));
        double v[4];
        for (int i = 0; i < 4; ++i)
            if (!parse_number(tokens[i], v[i])) fail("non-numeric field '" + tokens[i] + "'");
        if (v[0] != std::floor(v[0]) || v[1] != std::floor(v[1])) fail("frame_id and ped_id must be integers");
        const auto frame = static_cast<int64_t>(v[0]);
        const auto ped = static_cast<int64_t>(v[1]);
        auto& frames = by_ped[ped];
        if (frames.count(frame))
            fail("duplicate (frame " + std::to_string(frame) + ", ped " + std::to_string(ped) + ")");
        frames[frame] = Vec2{v[2], v[3]};
    }
    std::vector<RawTrack> tracks;
    for (const auto& [ped, frames] : by_ped) {
        RawTrack t;
        t.scene_id = scene_id;
        t.ped_id = ped;
        for (const auto& [f, p] : frames) {
            t.frames.push_back(f);
            t.positions.push_back(p);
        }
        tracks.push_back(std::move(t));
    }
    return tracks;
}

std::vector<RawTrack> ingest_benchmark_file(const std::filesystem::path& path, const std::string& scene_id) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    return parse_benchmark(in, scene_id, path.string());
}

void write_benchmark_file(const std::vector<RawTrack>& tracks, const std::filesystem::path& path) {
    struct Row {
        int64_t frame, ped;
        Vec2 p;
    };
    std::vector<Row> rows;
    for (const auto& t : tracks)
        for (size_t i = 0; i < t.size(); ++i) rows.push_back({t.frames[i], t.ped_id, t.positions[i]});
    std::sort(rows.begin(), rows.end(),
              [](const Row& a, const Row& b) { return std::tie(a.frame, a.ped) < std::tie(b.frame, b.ped); });
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << std::setprecision(17);
    for (const auto& r : rows) out << r.frame << ' ' << r.ped << ' ' << r.p.x << ' ' << r.p.y << '\n';
}

Vec2 SceneWindow::observed_disp(int n, int t) const {
    const size_t i = (static_cast<size_t>(n) * T + t) * 2;
    return {observed[i], observed[i + 1]};
}

Vec2 SceneWindow::future_disp(int n, int t) const {
    const size_t i = (static_cast<size_t>(n) * T_future + t) * 2;
    return {future[i], future[i + 1]};
}

std::vector<Vec2> SceneWindow::observed_absolute(int n) const {
    std::vector<Vec2> out(T);
    out[T - 1] = {origin[2 * n], origin[2 * n + 1]};
    for (int t = T - 1; t > 0; --t) {
        const Vec2 d = observed_disp(n, t);
        out[t - 1] = {out[t].x - d.x, out[t].y - d.y};
    }
    return out;
}

std::vector<Vec2> SceneWindow::future_absolute(int n) const {
    std::vector<Vec2> out(T_future);
    Vec2 p{origin[2 * n], origin[2 * n + 1]};
    for (int t = 0; t < T_future; ++t) {
        const Vec2 d = future_disp(n, t);
        p = {p.x + d.x, p.y + d.y};
        out[t] = p;
    }
    return out;
}

std::vector<uint8_t> neighbor_sets(const SceneWindow& w, double radius) {
    if (!(radius > 0)) throw std::invalid_argument("neighbor radius must be positive");
    std::vector<std::vector<Vec2>> abs(w.N);
    for (int n = 0; n < w.N; ++n) abs[n] = w.observed_absolute(n);
    std::vector<uint8_t> mask(static_cast<size_t>(w.N) * w.N, 0);
    for (int i = 0; i < w.N; ++i)
        for (int j = i + 1; j < w.N; ++j) {
            double best = std::numeric_limits<double>::infinity();
            for (int t = 0; t < w.T; ++t)
                best = std::min(best, std::hypot(abs[i][t].x - abs[j][t].x, abs[i][t].y - abs[j][t].y));
            if (best <= radius) mask[static_cast<size_t>(i) * w.N + j] = mask[static_cast<size_t>(j) * w.N + i] = 1;
        }
    return mask;
}

std::vector<SceneWindow> window_scenes(const std::vector<RawTrack>& tracks, const WindowConfig& config) {
    if (config.T < 1 || config.T_future < 1 || config.stride < 1 || config.max_peds < 1)
        throw std::invalid_argument("window sizes, stride and max_peds must be positive");
    std::map<std::string, std::vector<const RawTrack*>> scenes;
    for (const auto& t : tracks)
        if (!t.frames.empty()) scenes[t.scene_id].push_back(&t);

    const int span = config.T + config.T_future;
    std::vector<SceneWindow> windows;
    for (const auto& [scene, members] : scenes) {
        int64_t step = 0;
        int64_t first = std::numeric_limits<int64_t>::max();
        int64_t last = std::numeric_limits<int64_t>::min();
        for (const auto* t : members) {
            first = std::min(first, t->frames.front());
            last = std::max(last, t->frames.back());
            for (size_t i = 1; i < t->size(); ++i) {
                const int64_t d = t->frames[i] - t->frames[i - 1];
                if (d <= 0) throw DataError("scene " + scene + ": frames of ped " + std::to_string(t->ped_id) +
                                            " are not strictly increasing");
                step = step == 0 ? d : std::min(step, d);
            }
        }
        if (step == 0) step = 1;  // only single-frame tracks; nothing can qualify anyway
        for (const auto* t : members)
            for (int64_t f : t->frames)
                if ((f - first) % step != 0)
                    throw DataError("scene " + scene + ": non-uniform frame grid (frame " + std::to_string(f) +
                                    " is off the step-" + std::to_string(step) + " grid)");

        // index of each frame per track, for O(1) presence lookups
        std::vector<std::map<int64_t, size_t>> index(members.size());
        for (size_t m = 0; m < members.size(); ++m)
            for (size_t i = 0; i < members[m]->size(); ++i) index[m][members[m]->frames[i]] = i;

        for (int64_t start = first; start + (span - 1) * step <= last; start += config.stride * step) {
            struct Candidate {
                size_t member;
                size_t offset;
            };
            std::vector<Candidate> present;
            for (size_t m = 0; m < members.size(); ++m) {
                auto it = index[m].find(start);
                if (it == index[m].end()) continue;
                const size_t off = it->second;
                const auto& fr = members[m]->frames;
                // Contiguous on the grid: the frame span-1 entries later is exactly (span-1)*step away.
                if (off + span - 1 < fr.size() && fr[off + span - 1] - start == (span - 1) * step)
                    present.push_back({m, off});
            }
            if (present.empty()) continue;
            std::stable_sort(present.begin(), present.end(), [&](const Candidate& a, const Candidate& b) {
                const auto la = members[a.member]->size(), lb = members[b.member]->size();
                if (la != lb) return la > lb;
                return members[a.member]->ped_id < members[b.member]->ped_id;
            });
            if (static_cast<int>(present.size()) > config.max_peds) present.resize(config.max_peds);

            SceneWindow w;
            w.scene_id = scene;
            w.start_frame = start;
            w.N = static_cast<int>(present.size());
            w.T = config.T;
            w.T_future = config.T_future;
            w.observed.assign(static_cast<size_t>(w.N) * w.T * 2, 0.0f);
            w.future.assign(static_cast<size_t>(w.N) * w.T_future * 2, 0.0f);
            w.origin.assign(static_cast<size_t>(w.N) * 2, 0.0);
            for (int n = 0; n < w.N; ++n) {
                const auto* track = members[present[n].member];
                const Vec2* p = track->positions.data() + present[n].offset;
                w.ped_ids.push_back(track->ped_id);
                for (int t = 1; t < w.T; ++t) {
                    const size_t i = (static_cast<size_t>(n) * w.T + t) * 2;
                    w.observed[i] = static_cast<float>(p[t].x - p[t - 1].x);
                    w.observed[i + 1] = static_cast<float>(p[t].y - p[t - 1].y);
                }
                for (int t = 0; t < w.T_future; ++t) {
                    const size_t i = (static_cast<size_t>(n) * w.T_future + t) * 2;
                    const Vec2& a = p[w.T + t - 1];
                    const Vec2& b = p[w.T + t];
                    w.future[i] = static_cast<float>(b.x - a.x);
                    w.future[i + 1] = static_cast<float>(b.y - a.y);
                }
                w.origin[2 * n] = p[w.T - 1].x;
                w.origin[2 * n + 1] = p[w.T - 1].y;
            }
            w.neighbor_mask = neighbor_sets(w, config.neighbor_radius);
            windows.push_back(std::move(w));
        }
    }
    return windows;
}

std::vector<std::vector<Vec2>> simulate_agents(std::vector<AgentState> agents, const SynthConfig& config,
                                               uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> turn(0.0, 1.0);
    const double box = config.box;
    std::vector<std::vector<Vec2>> positions;
    positions.reserve(config.frames);
    std::vector<Vec2> frame(agents.size());
    for (size_t a = 0; a < agents.size(); ++a) frame[a] = agents[a].position;
    positions.push_back(frame);
    for (int f = 1; f < config.frames; ++f) {
        std::vector<Vec2> push(agents.size());
        if (config.repulsion_gain > 0) {
            for (size_t i = 0; i < agents.size(); ++i)
                for (size_t j = 0; j < agents.size(); ++j) {
                    if (i == j) continue;
                    const double dx = agents[i].position.x - agents[j].position.x;
                    const double dy = agents[i].position.y - agents[j].position.y;
                    const double d = std::hypot(dx, dy);
                    if (d >= 1.0 || d < 1e-9) continue;
                    const double s = config.repulsion_gain * (1.0 - d) / d;
                    push[i].x += s * dx;
                    push[i].y += s * dy;
                }
        }
        for (size_t i = 0; i < agents.size(); ++i) {
            auto& s = agents[i];
            const double noise = turn(rng);
            if (config.turn_sigma > 0) s.heading += config.turn_sigma * noise;
            const double vx = s.speed * std::cos(s.heading) + push[i].x;
            const double vy = s.speed * std::sin(s.heading) + push[i].y;
            s.position.x += vx * kFrameSeconds;
            s.position.y += vy * kFrameSeconds;
            if (s.position.x < 0) s.position.x = -s.position.x, s.heading = std::numbers::pi - s.heading;
            if (s.position.x > box) s.position.x = 2 * box - s.position.x, s.heading = std::numbers::pi - s.heading;
            if (s.position.y < 0) s.position.y = -s.position.y, s.heading = -s.heading;
            if (s.position.y > box) s.position.y = 2 * box - s.position.y, s.heading = -s.heading;
            frame[i] = s.position;
        }
        positions.push_back(frame);
    }
    return positions;
}

std::vector<std::string> synthetic_scene_names(const SynthConfig& config) {
    std::vector<std::string> names;
    for (int s = 0; s < config.n_scenes; ++s) {
        std::ostringstream os;
        os << "synth_" << std::setw(2) << std::setfill('0') << s;
        names.push_back(os.str());
    }
    return names;
}

std::vector<RawTrack> synthesize_scenes(const SynthConfig& config) {
    if (config.n_scenes < 1 || config.peds_per_scene < 1 || config.frames < 1 || config.speed_min <= 0 ||
        config.speed_max < config.speed_min || config.turn_sigma < 0 || config.repulsion_gain < 0 || config.box <= 0 ||
        2 * config.spawn_margin >= config.box)
        throw std::invalid_argument("invalid synthetic scene configuration");
    const auto names = synthetic_scene_names(config);
    std::vector<RawTrack> tracks;
    std::mt19937_64 root(config.seed);
    for (int s = 0; s < config.n_scenes; ++s) {
        const uint64_t scene_seed = root();
        const uint64_t dynamics_seed = root();
        std::mt19937_64 rng(scene_seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<AgentState> agents(config.peds_per_scene);
        const double lo = config.spawn_margin, hi = config.box - config.spawn_margin;
        for (auto& a : agents) {
            a.position = {lo + (hi - lo) * unit(rng), lo + (hi - lo) * unit(rng)};
            a.heading = 2 * std::numbers::pi * unit(rng);
            a.speed = config.speed_min + (config.speed_max - config.speed_min) * unit(rng);
        }
        const auto positions = simulate_agents(agents, config, dynamics_seed);
        for (int a = 0; a < config.peds_per_scene; ++a) {
            RawTrack t;
            t.scene_id = names[s];
            t.ped_id = a + 1;
            for (int f = 0; f < config.frames; ++f) {
                t.frames.push_back(static_cast<int64_t>(f) * config.frame_step);
                t.positions.push_back(positions[f][a]);
            }
            tracks.push_back(std::move(t));
        }
    }
    return tracks;
}

std::vector<DatasetSplit> make_splits(const std::vector<std::string>& names) {
    if (names.size() < 2) throw std::invalid_argument("leave-one-out needs at least two scenes");
    std::set<std::string> unique(names.begin(), names.end());
    if (unique.size() != names.size()) throw std::invalid_argument("duplicate scene names");
    std::vector<DatasetSplit> splits;
    for (const auto& test : names) {
        DatasetSplit s;
        s.test_scene = test;
        for (const auto& n : names)
            if (n != test) s.train_scenes.push_back(n);
        splits.push_back(std::move(s));
    }
    return splits;
}

std::vector<std::string> scene_names(const std::vector<RawTrack>& tracks) {
    std::vector<std::string> names;
    for (const auto& t : tracks)
        if (std::find(names.begin(), names.end(), t.scene_id) == names.end()) names.push_back(t.scene_id);
    return names;
}

std::vector<RawTrack> tracks_in(const std::vector<RawTrack>& tracks, const std::vector<std::string>& scenes) {
    std::vector<RawTrack> out;
    for (const auto& t : tracks)
        if (std::find(scenes.begin(), scenes.end(), t.scene_id) != scenes.end()) out.push_back(t);
    return out;
}

void save_windows(const std::vector<SceneWindow>& windows, const std::filesystem::path& path) {
    Container c;
    auto& meta = c.metadata();
    meta["kind"] = "windows";
    meta["count"] = windows.size();
    for (size_t i = 0; i < windows.size(); ++i) {
        const auto& w = windows[i];
        const std::string p = "window/" + std::to_string(i) + "/";
        meta["windows"].push_back({{"scene", w.scene_id}, {"start_frame", w.start_frame}, {"N", w.N}, {"T", w.T},
                                   {"T_future", w.T_future}});
        c.put_i64(p + "ped_ids", {w.N}, w.ped_ids);
        c.put_f32(p + "observed", {w.N, w.T, 2}, w.observed);
        c.put_f32(p + "future", {w.N, w.T_future, 2}, w.future);
        c.put_f64(p + "origin", {w.N, 2}, w.origin);
        std::vector<int64_t> mask(w.neighbor_mask.begin(), w.neighbor_mask.end());
        c.put_i64(p + "neighbor_mask", {w.N, w.N}, mask);
    }
    c.save(path);
}

std::vector<SceneWindow> load_windows(const std::filesystem::path& path) {
    const Container c = Container::load(path);
    const auto& meta = c.metadata();
    if (meta.value("kind", "") != "windows") throw DataError(path.string() + " is not a window cache");
    std::vector<SceneWindow> out;
    const size_t count = meta.value("count", size_t{0});
    for (size_t i = 0; i < count; ++i) {
        const auto& m = meta["windows"][i];
        const std::string p = "window/" + std::to_string(i) + "/";
        SceneWindow w;
        w.scene_id = m["scene"];
        w.start_frame = m["start_frame"];
        w.N = m["N"];
        w.T = m["T"];
        w.T_future = m["T_future"];
        w.ped_ids = c.get_i64(p + "ped_ids");
        w.observed = c.get_f32(p + "observed");
        w.future = c.get_f32(p + "future");
        w.origin = c.get_f64(p + "origin");
        for (int64_t v : c.get_i64(p + "neighbor_mask")) w.neighbor_mask.push_back(static_cast<uint8_t>(v));
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace updd
