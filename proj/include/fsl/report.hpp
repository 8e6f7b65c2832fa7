#pragma once

#include <optional>
#include <string>
#include <vector>

namespace fsl {

/// Minimal RFC-4180 CSV writer: cells containing commas, quotes or newlines
/// are quoted with doubled inner quotes; numbers are written at full float
/// precision.
class CsvWriter {
   public:
    explicit CsvWriter(std::vector<std::string> columns);

    void append_row(const std::vector<std::string>& cells);
    std::string str() const;
    void write_file(const std::string& path) const;

    static std::string cell(double v);
    static std::string cell(const std::optional<double>& v);
    static std::string escape(const std::string& raw);

   private:
    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

/// One metric column of a plot.
struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Piecewise-linear SVG chart of metric columns against time. With
/// log_scale_y the values are drawn on a log10 axis (nonpositive values are
/// clamped to the smallest positive value present, or 1e-12).
std::string render_svg_plot(const std::string& title, const std::vector<PlotSeries>& series,
                            bool log_scale_y = false, int width = 860, int height = 480);

/// Pass/fail line of a summary file.
struct SummaryLine {
    bool pass = false;
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    std::string note;  // optional free text (e.g. comparison direction)
};

/// "PASS/FAIL name value bound [note]" lines, one per check.
std::string render_summary(const std::vector<SummaryLine>& lines);

/// Create directories recursively and write a file.
void write_text_file(const std::string& path, const std::string& content);

/// Resolve the output root: explicit argument if nonempty, else the
/// FSLAB_OUT environment variable, else "./out".
std::string output_root(const std::string& override_path = "");

}  // namespace fsl
