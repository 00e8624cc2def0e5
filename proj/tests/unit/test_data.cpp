#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "updd/data.hpp"
#include "updd/errors.hpp"

using namespace updd;

namespace {

RawTrack straight(int64_t ped, int frames, Vec2 start, Vec2 step, int64_t first_frame = 0, int64_t frame_step = 10) {
    RawTrack t;
    t.scene_id = "s";
    t.ped_id = ped;
    for (int i = 0; i < frames; ++i) {
        t.frames.push_back(first_frame + i * frame_step);
        t.positions.push_back({start.x + i * step.x, start.y + i * step.y});
    }
    return t;
}

double min_pair_distance(const std::vector<std::vector<Vec2>>& pos) {
    double best = 1e9;
    for (const auto& f : pos) best = std::min(best, std::hypot(f[0].x - f[1].x, f[0].y - f[1].y));
    return best;
}

}  // namespace

TEST_CASE("two lines make one track of length 2") {
    std::istringstream in("0 1 0.0 0.0\n10 1 0.4 0.0\n");
    auto tracks = parse_benchmark(in, "s");
    REQUIRE(tracks.size() == 1);
    CHECK(tracks[0].size() == 2);
    CHECK(tracks[0].positions[1].x == doctest::Approx(0.4));
}

TEST_CASE("empty input gives no tracks") {
    std::istringstream in("");
    CHECK(parse_benchmark(in, "s").empty());
    std::istringstream comments("# header\n\n   \n");
    CHECK(parse_benchmark(comments, "s").empty());
}

TEST_CASE("malformed field names its line") {
    std::istringstream in("0 1 abc 0.0\n");
    try {
        parse_benchmark(in, "s", "f.txt");
        FAIL("expected an error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("f.txt:1") != std::string::npos);
    }
}

TEST_CASE("duplicate frame and pedestrian pair is an error") {
    std::istringstream in("0 1 0 0\n0 1 1 1\n");
    CHECK_THROWS_AS(parse_benchmark(in, "s"), DataError);
}

TEST_CASE("tracks sorted by pedestrian then frame") {
    std::istringstream in("10 2 0 0\n0 2 0 0\n0 1 0 0\n");
    auto t = parse_benchmark(in, "s");
    REQUIRE(t.size() == 2);
    CHECK(t[0].ped_id == 1);
    CHECK(t[1].frames == std::vector<int64_t>{0, 10});
}

TEST_CASE("25 uniform frames give 6 windows") {
    auto w = window_scenes({straight(1, 25, {0, 0}, {0.1, 0})});
    CHECK(w.size() == 6);
    for (const auto& x : w) CHECK(x.N == 1);
}

TEST_CASE("window count per complete segment") {
    for (int frames : {20, 21, 33}) {
        for (int stride : {1, 2, 3}) {
            WindowConfig cfg;
            cfg.stride = stride;
            auto w = window_scenes({straight(1, frames, {0, 0}, {0.1, 0})}, cfg);
            CHECK(static_cast<int>(w.size()) == (frames - 20) / stride + 1);
        }
    }
}

TEST_CASE("19 frames contribute to no window") { CHECK(window_scenes({straight(1, 19, {0, 0}, {1, 0})}).empty()); }

TEST_CASE("constant velocity gives constant displacements") {
    auto w = window_scenes({straight(1, 20, {1, 1}, {0.1, 0})});
    REQUIRE(w.size() == 1);
    CHECK(w[0].observed_disp(0, 0).x == 0);
    for (int t = 1; t < 8; ++t) CHECK(w[0].observed_disp(0, t).x == doctest::Approx(0.1).epsilon(1e-6));
    for (int t = 0; t < 12; ++t) {
        CHECK(w[0].future_disp(0, t).x == doctest::Approx(0.1).epsilon(1e-6));
        CHECK(w[0].future_disp(0, t).y == doctest::Approx(0.0));
    }
}

TEST_CASE("absolute positions rebuild from origin and displacements") {
    SynthConfig cfg;
    cfg.n_scenes = 2;
    auto tracks = synthesize_scenes(cfg);
    auto windows = window_scenes(tracks);
    REQUIRE(!windows.empty());
    for (const auto& w : windows) {
        for (int n = 0; n < w.N; ++n) {
            const RawTrack* src = nullptr;
            for (const auto& t : tracks)
                if (t.scene_id == w.scene_id && t.ped_id == w.ped_ids[n]) src = &t;
            REQUIRE(src != nullptr);
            size_t k = 0;
            while (src->frames[k] != w.start_frame) ++k;
            auto obs = w.observed_absolute(n), fut = w.future_absolute(n);
            for (int t = 0; t < w.T; ++t) {
                CHECK(std::abs(obs[t].x - src->positions[k + t].x) < 1e-4);
                CHECK(std::abs(obs[t].y - src->positions[k + t].y) < 1e-4);
            }
            for (int t = 0; t < w.T_future; ++t) {
                CHECK(std::abs(fut[t].x - src->positions[k + w.T + t].x) < 1e-4);
                CHECK(std::abs(fut[t].y - src->positions[k + w.T + t].y) < 1e-4);
            }
        }
    }
}

TEST_CASE("non-uniform frame grid is an error") {
    RawTrack t = straight(1, 20, {0, 0}, {1, 0});
    t.frames[5] += 3;
    CHECK_THROWS_AS(window_scenes({t}), DataError);
}

TEST_CASE("neighbor radius rule") {
    auto near = window_scenes({straight(1, 20, {0, 0}, {0.1, 0}), straight(2, 20, {0, 0.5}, {0.1, 0})});
    REQUIRE(near.size() == 1);
    CHECK(near[0].is_neighbor(0, 1));
    CHECK(near[0].is_neighbor(1, 0));
    CHECK(!near[0].is_neighbor(0, 0));
    auto far = window_scenes({straight(1, 20, {0, 0}, {0.1, 0}), straight(2, 20, {0, 100}, {0.1, 0})});
    CHECK(!far[0].is_neighbor(0, 1));
    CHECK(!far[0].is_neighbor(1, 0));
}

TEST_CASE("neighbor mask is symmetric with an empty diagonal") {
    SynthConfig cfg;
    cfg.n_scenes = 3;
    for (const auto& w : window_scenes(synthesize_scenes(cfg))) {
        for (int i = 0; i < w.N; ++i) {
            CHECK(!w.is_neighbor(i, i));
            for (int j = 0; j < w.N; ++j) CHECK(w.is_neighbor(i, j) == w.is_neighbor(j, i));
        }
    }
}

TEST_CASE("pedestrian cap keeps the longest tracks") {
    WindowConfig cfg;
    cfg.max_peds = 2;
    auto w = window_scenes({straight(1, 20, {0, 0}, {0.1, 0}), straight(2, 30, {0, 1}, {0.1, 0}),
                            straight(3, 25, {0, 2}, {0.1, 0})},
                           cfg);
    REQUIRE(!w.empty());
    CHECK(w[0].N == 2);
    CHECK(w[0].ped_ids == std::vector<int64_t>{2, 3});
}

TEST_CASE("degenerate synthetic dynamics are straight lines") {
    SynthConfig cfg;
    cfg.n_scenes = 1;
    cfg.turn_sigma = 0;
    cfg.repulsion_gain = 0;
    cfg.box = 1e6;  // no wall contact
    for (const auto& t : synthesize_scenes(cfg)) {
        const double dx = t.positions[1].x - t.positions[0].x, dy = t.positions[1].y - t.positions[0].y;
        for (size_t i = 1; i < t.size(); ++i) {
            CHECK(t.positions[i].x - t.positions[i - 1].x == doctest::Approx(dx).epsilon(1e-9));
            CHECK(t.positions[i].y - t.positions[i - 1].y == doctest::Approx(dy).epsilon(1e-9));
        }
    }
}

TEST_CASE("synthetic scenes are seed-deterministic") {
    SynthConfig cfg;
    cfg.n_scenes = 2;
    auto a = synthesize_scenes(cfg), b = synthesize_scenes(cfg);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].frames == b[i].frames);
        for (size_t k = 0; k < a[i].size(); ++k) CHECK(a[i].positions[k].x == b[i].positions[k].x);
    }
    cfg.seed = 2;
    auto c = synthesize_scenes(cfg);
    CHECK(c[0].positions[3].x != a[0].positions[3].x);
}

TEST_CASE("positions stay inside the box") {
    SynthConfig cfg;
    cfg.n_scenes = 4;
    cfg.frames = 200;
    for (const auto& t : synthesize_scenes(cfg))
        for (const auto& p : t.positions) {
            CHECK(p.x >= 0);
            CHECK(p.x <= cfg.box);
            CHECK(p.y >= 0);
            CHECK(p.y <= cfg.box);
        }
}

TEST_CASE("repulsion keeps head-on walkers further apart") {
    SynthConfig cfg;
    cfg.turn_sigma = 0;
    cfg.frames = 30;
    cfg.box = 1e6;
    std::vector<AgentState> agents{{{100, 100.1}, 0.0, 1.0}, {{112, 100}, std::numbers::pi, 1.0}};
    cfg.repulsion_gain = 0;
    const double off = min_pair_distance(simulate_agents(agents, cfg, 1));
    cfg.repulsion_gain = 0.5;
    const double on = min_pair_distance(simulate_agents(agents, cfg, 1));
    CHECK(on > off);
}

TEST_CASE("speeds scale displacements") {
    SynthConfig cfg;
    cfg.turn_sigma = 0.1;
    cfg.repulsion_gain = 0;
    cfg.box = 1e6;
    cfg.frames = 15;
    std::vector<AgentState> a{{{50, 50}, 0.3, 1.0}}, b{{{50, 50}, 0.3, 2.5}};
    auto pa = simulate_agents(a, cfg, 9), pb = simulate_agents(b, cfg, 9);
    for (size_t f = 1; f < pa.size(); ++f) {
        const double dxa = pa[f][0].x - pa[f - 1][0].x, dxb = pb[f][0].x - pb[f - 1][0].x;
        CHECK(dxb == doctest::Approx(2.5 * dxa).epsilon(1e-9));
    }
}

TEST_CASE("leave-one-out splits") {
    auto s = make_splits({"a", "b"});
    REQUIRE(s.size() == 2);
    CHECK(s[0].test_scene == "a");
    CHECK(s[0].train_scenes == std::vector<std::string>{"b"});
    CHECK(s[1].train_scenes == std::vector<std::string>{"a"});
    auto five = make_splits({"eth", "hotel", "univ", "zara1", "zara2"});
    CHECK(five.size() == 5);
    for (const auto& sp : five) {
        CHECK(sp.train_scenes.size() == 4);
        CHECK(std::find(sp.train_scenes.begin(), sp.train_scenes.end(), sp.test_scene) == sp.train_scenes.end());
    }
    CHECK_THROWS(make_splits({"a", "a"}));
    CHECK_THROWS(make_splits({"a"}));
}

TEST_CASE("benchmark files and window caches round-trip") {
    SynthConfig cfg;
    cfg.n_scenes = 1;
    auto tracks = synthesize_scenes(cfg);
    const auto dir = std::filesystem::temp_directory_path();
    write_benchmark_file(tracks, dir / "updd_bench.txt");
    auto back = ingest_benchmark_file(dir / "updd_bench.txt", tracks[0].scene_id);
    REQUIRE(back.size() == tracks.size());
    for (size_t i = 0; i < back.size(); ++i) CHECK(back[i].frames == tracks[i].frames);

    auto windows = window_scenes(tracks);
    save_windows(windows, dir / "updd_windows.updd");
    auto cached = load_windows(dir / "updd_windows.updd");
    REQUIRE(cached.size() == windows.size());
    CHECK(cached[0].observed == windows[0].observed);
    CHECK(cached[0].neighbor_mask == windows[0].neighbor_mask);
    CHECK(cached[0].origin == windows[0].origin);
}
