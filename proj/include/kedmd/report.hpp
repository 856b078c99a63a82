#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kedmd/types.hpp"

namespace kedmd {

/// FNV-1a 64-bit content hash.
std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t hash_file(const std::string& path);
std::string hash_hex(std::uint64_t h);

/// One named data series for the SVG plotter.
struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false;
    int width = 760;
    int height = 480;
};

/// Minimal line-plot SVG emitter (batch figures, no external dependency).
void write_svg_plot(const std::string& path, const std::vector<PlotSeries>& series,
                    const PlotOptions& options);

/// Run manifest: command, config snapshot, output-file content hashes and
/// wall-clock timings; reruns with identical inputs give identical hashes.
struct RunManifest {
    std::string command;
    std::string config_snapshot;
    std::map<std::string, std::string> output_hashes;
    std::map<std::string, double> timings_s;

    void record_output(const std::string& path);
    void write(const std::string& path) const;
};

}  // namespace kedmd
