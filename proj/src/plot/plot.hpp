#pragma once

#include <map>
#include <string>
#include <vector>

namespace mmgan {

// One named curve; x is the step column, points with empty cells are absent.
struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

// Reads a metrics CSV (header row + numeric rows, empty cells allowed) into
// one series per non-x column.
std::vector<Series> read_metrics_csv(const std::string& path,
                                     const std::string& x_column = "step");

// Polyline chart of the given series on a white canvas with axis ticks,
// written as an RGB PNG. Throws if every series is empty.
void render_chart(const std::vector<Series>& series, int64_t width, int64_t height,
                  const std::string& path);

// Standard chart set from a training CSV: losses, augmentation control, and
// per-modality distribution distances. Returns the written file paths.
std::vector<std::string> plot_metrics(const std::string& csv_path,
                                      const std::string& out_dir);

} // namespace mmgan
