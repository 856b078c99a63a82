#include "kedmd/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace kedmd {

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("hash_file: cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

const char* kPalette[] = {"#1f6fb2", "#d1495b", "#2e8b57", "#8a5ab1",
                          "#c77c2a", "#4a4a4a"};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

void write_svg_plot(const std::string& path, const std::vector<PlotSeries>& series,
                    const PlotOptions& opt) {
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            double y = s.y[i];
            if (opt.log_y) {
                if (!(y > 0.0)) continue;
                y = std::log10(y);
            }
            if (!std::isfinite(s.x[i]) || !std::isfinite(y)) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    }
    if (!std::isfinite(xmin)) { xmin = 0; xmax = 1; ymin = 0; ymax = 1; }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;

    const double ml = 70, mr = 20, mt = 40, mb = 50;
    const double pw = opt.width - ml - mr, ph = opt.height - mt - mb;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width
       << "\" height=\"" << opt.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << opt.width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
          "font-size=\"14\">" << opt.title << "</text>\n";

    // Axes box and ticks.
    os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw
       << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#333\"/>\n";
    const int nticks = 5;
    for (int i = 0; i <= nticks; ++i) {
        const double tx = xmin + (xmax - xmin) * i / nticks;
        const double ty = ymin + (ymax - ymin) * i / nticks;
        os << "<line x1=\"" << px(tx) << "\" y1=\"" << mt + ph << "\" x2=\"" << px(tx)
           << "\" y2=\"" << mt + ph + 4 << "\" stroke=\"#333\"/>\n"
           << "<text x=\"" << px(tx) << "\" y=\"" << mt + ph + 18
           << "\" text-anchor=\"middle\">" << fmt(tx) << "</text>\n";
        os << "<line x1=\"" << ml - 4 << "\" y1=\"" << py(ty) << "\" x2=\"" << ml
           << "\" y2=\"" << py(ty) << "\" stroke=\"#333\"/>\n"
           << "<text x=\"" << ml - 8 << "\" y=\"" << py(ty) + 4
           << "\" text-anchor=\"end\">"
           << (opt.log_y ? ("1e" + fmt(ty)) : fmt(ty)) << "</text>\n";
    }
    os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << opt.height - 10
       << "\" text-anchor=\"middle\">" << opt.x_label << "</text>\n"
       << "<text x=\"18\" y=\"" << mt + ph / 2
       << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << mt + ph / 2
       << ")\">" << opt.y_label << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = kPalette[k % (sizeof kPalette / sizeof *kPalette)];
        os << "<polyline fill=\"none\" stroke=\"" << color
           << "\" stroke-width=\"1.5\" points=\"";
        bool pen_down = false;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            double y = s.y[i];
            if (opt.log_y) {
                if (!(y > 0.0)) { pen_down = false; continue; }
                y = std::log10(y);
            }
            if (!std::isfinite(s.x[i]) || !std::isfinite(y)) { pen_down = false; continue; }
            os << px(s.x[i]) << ',' << py(y) << ' ';
            (void)pen_down;
            pen_down = true;
        }
        os << "\"/>\n";
        os << "<text x=\"" << ml + pw - 8 << "\" y=\"" << mt + 16 + 16 * k
           << "\" text-anchor=\"end\" fill=\"" << color << "\">" << s.name
           << "</text>\n";
    }
    os << "</svg>\n";

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open plot file for writing: " + path);
    out << os.str();
}

void RunManifest::record_output(const std::string& path) {
    output_hashes[path] = hash_hex(hash_file(path));
}

void RunManifest::write(const std::string& path) const {
    nlohmann::json j;
    j["command"] = command;
    if (!config_snapshot.empty()) {
        j["config"] = nlohmann::json::parse(config_snapshot, nullptr, false);
        if (j["config"].is_discarded()) j["config"] = config_snapshot;
    }
    j["outputs"] = output_hashes;
    j["timings_s"] = timings_s;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open manifest for writing: " + path);
    out << j.dump(2) << '\n';
}

}  // namespace kedmd
