#pragma once

#include "scenesketch/geometry.hpp"

#include <string>

namespace ssk {

struct SvgParseError : std::runtime_error {
    explicit SvgParseError(const std::string &msg) : std::runtime_error(msg) {}
};

// Writes one cubic <path> per stroke with probability >= drop_threshold.
// stroke-width = width * probability, black on a white background rect,
// coordinates in pixels at sketch.canvas_size.
std::string export_svg(const Sketch &sketch, double drop_threshold = 0.1);

// Parses documents produced by export_svg (or compatible single-cubic paths).
// Every imported stroke gets probability 1.
Sketch import_svg(const std::string &document);

void write_svg_file(const std::string &path, const Sketch &sketch, double drop_threshold = 0.1);
Sketch read_svg_file(const std::string &path);

} // namespace ssk
