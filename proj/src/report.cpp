#include "fsl/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "fsl/errors.hpp"

namespace fsl {

CsvWriter::CsvWriter(std::vector<std::string> columns) : columns_(std::move(columns)) {}

void CsvWriter::append_row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_.size())
        throw std::invalid_argument("CsvWriter: row width does not match header");
    rows_.push_back(cells);
}

std::string CsvWriter::escape(const std::string& raw) {
    if (raw.find_first_of(",\"\n\r") == std::string::npos) return raw;
    std::string out = "\"";
    for (char c : raw) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

std::string CsvWriter::cell(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string CsvWriter::cell(const std::optional<double>& v) {
    return v ? cell(*v) : std::string();
}

std::string CsvWriter::str() const {
    std::ostringstream out;
    for (std::size_t j = 0; j < columns_.size(); ++j) {
        if (j) out << ',';
        out << escape(columns_[j]);
    }
    out << "\r\n";
    for (const auto& row : rows_) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out << ',';
            out << escape(row[j]);
        }
        out << "\r\n";
    }
    return out.str();
}

void CsvWriter::write_file(const std::string& path) const { write_text_file(path, str()); }

namespace {

const char* kSeriesColors[] = {"#1f6fb2", "#d1495b", "#3a7d44", "#8443ad",
                               "#d08c1d", "#1a9d9d", "#6b4b3e", "#54586a"};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace

std::string render_svg_plot(const std::string& title, const std::vector<PlotSeries>& series,
                            bool log_scale_y, int width, int height) {
    const double ml = 70, mr = 20, mt = 36, mb = 44;
    const double pw = width - ml - mr;
    const double ph = height - mt - mb;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    double min_pos = std::numeric_limits<double>::infinity();
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            double y = s.y[i];
            if (y > 0.0) min_pos = std::min(min_pos, y);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (!std::isfinite(xmin)) {
        xmin = 0;
        xmax = 1;
        ymin = 0;
        ymax = 1;
    }
    if (log_scale_y) {
        if (!std::isfinite(min_pos)) min_pos = 1e-12;
        ymin = std::log10(std::max(min_pos, 1e-300));
        double top = ymax > 0 ? std::log10(ymax) : ymin + 1.0;
        ymax = top;
    }
    if (xmax - xmin < 1e-30) xmax = xmin + 1.0;
    if (ymax - ymin < 1e-30) ymax = ymin + 1.0;

    auto tx = [&](double x) { return ml + pw * (x - xmin) / (xmax - xmin); };
    auto ty = [&](double yv) {
        double y = yv;
        if (log_scale_y) y = std::log10(std::max(yv, std::pow(10.0, ymin)));
        return mt + ph * (1.0 - (y - ymin) / (ymax - ymin));
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
        << title << (log_scale_y ? " (log scale)" : "") << "</text>\n";

    // Axes and grid.
    svg << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    const int nticks = 5;
    for (int i = 0; i <= nticks; ++i) {
        const double fx = xmin + (xmax - xmin) * i / nticks;
        const double px = tx(fx);
        svg << "<line x1=\"" << px << "\" y1=\"" << mt << "\" x2=\"" << px << "\" y2=\""
            << mt + ph << "\" stroke=\"#ddd\"/>\n";
        svg << "<text x=\"" << px << "\" y=\"" << mt + ph + 16
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(fx)
            << "</text>\n";
        const double fy = ymin + (ymax - ymin) * i / nticks;
        const double py = mt + ph * (1.0 - static_cast<double>(i) / nticks);
        svg << "<line x1=\"" << ml << "\" y1=\"" << py << "\" x2=\"" << ml + pw << "\" y2=\"" << py
            << "\" stroke=\"#ddd\"/>\n";
        svg << "<text x=\"" << ml - 6 << "\" y=\"" << py + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << (log_scale_y ? ("1e" + fmt(fy)) : fmt(fy)) << "</text>\n";
    }

    int color = 0;
    for (const auto& s : series) {
        const char* stroke = kSeriesColors[color % 8];
        svg << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.6\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (log_scale_y && !(s.y[i] > 0.0) ) continue;
            svg << tx(s.x[i]) << ',' << ty(s.y[i]) << ' ';
        }
        svg << "\"/>\n";
        svg << "<text x=\"" << ml + 8 << "\" y=\"" << mt + 16 + 16 * color
            << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << stroke << "\">"
            << s.label << "</text>\n";
        ++color;
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string render_summary(const std::vector<SummaryLine>& lines) {
    std::ostringstream out;
    for (const auto& l : lines) {
        out << (l.pass ? "PASS" : "FAIL") << ' ' << l.name << ' ' << fmt(l.value) << ' '
            << fmt(l.bound);
        if (!l.note.empty()) out << ' ' << l.note;
        out << '\n';
    }
    return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << content;
}

std::string output_root(const std::string& override_path) {
    if (!override_path.empty()) return override_path;
    if (const char* env = std::getenv("FSLAB_OUT"); env && *env) return env;
    return "out";
}

}  // namespace fsl
