#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace updd {

// Seconds between consecutive annotated frames.
inline constexpr double kFrameSeconds = 0.4;

struct Vec2 {
    double x = 0;
    double y = 0;
};

// One pedestrian's annotated positions in one scene, frames strictly increasing.
struct RawTrack {
    std::string scene_id;
    int64_t ped_id = 0;
    std::vector<int64_t> frames;
    std::vector<Vec2> positions;  // meters

    size_t size() const { return frames.size(); }
};

// Parses whitespace-separated `frame_id ped_id x y` lines. Blank lines and
// `#` comments are skipped. Result is sorted by (ped_id, frame_id).
std::vector<RawTrack> parse_benchmark(std::istream& in, const std::string& scene_id,
                                      const std::string& source = "<stream>");
std::vector<RawTrack> ingest_benchmark_file(const std::filesystem::path& path, const std::string& scene_id);
void write_benchmark_file(const std::vector<RawTrack>& tracks, const std::filesystem::path& path);

// Fixed-horizon sample: N pedestrians present over T observed + T' future frames.
struct SceneWindow {
    std::string scene_id;
    int64_t start_frame = 0;
    int N = 0;
    int T = 8;
    int T_future = 12;
    std::vector<int64_t> ped_ids;
    // [N, T, 2] per-frame displacements; the first observed step is zero.
    std::vector<float> observed;
    // [N, T', 2] per-frame displacements continuing from the last observed frame.
    std::vector<float> future;
    // [N, 2] absolute position at the last observed frame.
    std::vector<double> origin;
    // [N, N] row i lists the neighbors of i; diagonal false.
    std::vector<uint8_t> neighbor_mask;

    Vec2 observed_disp(int n, int t) const;
    Vec2 future_disp(int n, int t) const;
    bool is_neighbor(int i, int j) const { return neighbor_mask[static_cast<size_t>(i) * N + j] != 0; }
    // Absolute positions rebuilt from origin and displacements.
    std::vector<Vec2> observed_absolute(int n) const;
    std::vector<Vec2> future_absolute(int n) const;
};

struct WindowConfig {
    int T = 8;
    int T_future = 12;
    int stride = 1;  // in frame steps
    double neighbor_radius = 5.0;
    int max_peds = 32;
};

// Throws DataError when a scene's frame grid is not uniform.
std::vector<SceneWindow> window_scenes(const std::vector<RawTrack>& tracks, const WindowConfig& config = {});

// mask[i][j] iff i != j and the closest observed approach is within `radius` meters.
std::vector<uint8_t> neighbor_sets(const SceneWindow& window, double radius);

struct SynthConfig {
    int n_scenes = 20;
    int peds_per_scene = 8;
    int frames = 40;
    double speed_min = 0.8;  // m/s
    double speed_max = 1.6;
    double turn_sigma = 0.15;  // rad per frame
    double repulsion_gain = 0.5;
    double box = 20.0;
    double spawn_margin = 2.0;
    uint64_t seed = 1;
    int64_t frame_step = 10;
};

struct AgentState {
    Vec2 position;
    double heading = 0;  // radians
    double speed = 0;    // m/s
};

// Noisy constant-velocity agents with short-range pairwise repulsion, reflected
// at the walls of a [0, box]² arena. Returns positions [frames][agents].
std::vector<std::vector<Vec2>> simulate_agents(std::vector<AgentState> agents, const SynthConfig& config,
                                               uint64_t seed);

std::vector<RawTrack> synthesize_scenes(const SynthConfig& config);
std::vector<std::string> synthetic_scene_names(const SynthConfig& config);

struct DatasetSplit {
    std::vector<std::string> train_scenes;
    std::string test_scene;
};

// Leave-one-out: one split per scene.
std::vector<DatasetSplit> make_splits(const std::vector<std::string>& scene_names);

std::vector<std::string> scene_names(const std::vector<RawTrack>& tracks);
std::vector<RawTrack> tracks_in(const std::vector<RawTrack>& tracks, const std::vector<std::string>& scenes);

// Window caching through the checkpoint container.
void save_windows(const std::vector<SceneWindow>& windows, const std::filesystem::path& path);
std::vector<SceneWindow> load_windows(const std::filesystem::path& path);

}  // namespace updd
