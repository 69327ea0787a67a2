#include "scenesketch/svg.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ssk {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

// Skips whitespace and at most one comma.
void skip_sep(const std::string &s, size_t &i) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i])))
        ++i;
    if (i < s.size() && s[i] == ',') {
        ++i;
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i])))
            ++i;
    }
}

double parse_number(const std::string &s, size_t &i, int path_index) {
    skip_sep(s, i);
    size_t end = i;
    char *endp = nullptr;
    double v = std::strtod(s.c_str() + i, &endp);
    end = endp - s.c_str();
    if (end == i)
        throw SvgParseError("path " + std::to_string(path_index) + ": expected number in 'd' attribute");
    i = end;
    return v;
}

std::string find_attr(const std::string &tag, const std::string &name, int path_index) {
    size_t pos = tag.find(name + "=\"");
    if (pos == std::string::npos)
        throw SvgParseError("path " + std::to_string(path_index) + ": missing attribute '" + name + "'");
    size_t start = pos + name.size() + 2;
    size_t end = tag.find('"', start);
    if (end == std::string::npos)
        throw SvgParseError("path " + std::to_string(path_index) + ": unterminated attribute '" + name + "'");
    return tag.substr(start, end - start);
}

} // namespace

std::string export_svg(const Sketch &sketch, double drop_threshold) {
    if (drop_threshold < 0.0 || drop_threshold >= 1.0)
        throw std::domain_error("export_svg: drop_threshold must be in [0,1)");
    const int sz = sketch.canvas_size;
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << sz << "\" height=\"" << sz
        << "\" viewBox=\"0 0 " << sz << " " << sz << "\">\n";
    out << "<rect width=\"" << sz << "\" height=\"" << sz << "\" fill=\"white\"/>\n";
    for (const auto &s : sketch.strokes) {
        if (s.probability < drop_threshold)
            continue;
        const double k = static_cast<double>(sz);
        out << "<path d=\"M " << fmt(s.points[0].x * k) << " " << fmt(s.points[0].y * k) << " C "
            << fmt(s.points[1].x * k) << " " << fmt(s.points[1].y * k) << ", "
            << fmt(s.points[2].x * k) << " " << fmt(s.points[2].y * k) << ", "
            << fmt(s.points[3].x * k) << " " << fmt(s.points[3].y * k)
            << "\" stroke=\"black\" fill=\"none\" stroke-width=\""
            << fmt(s.width * s.probability) << "\" stroke-linecap=\"round\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

Sketch import_svg(const std::string &document) {
    Sketch sketch;
    sketch.region = Region::Combined;

    // Canvas size from the <svg> tag when present.
    size_t svg_pos = document.find("<svg");
    if (svg_pos != std::string::npos) {
        size_t tag_end = document.find('>', svg_pos);
        std::string tag = document.substr(svg_pos, tag_end == std::string::npos ? std::string::npos : tag_end - svg_pos);
        size_t wp = tag.find("width=\"");
        if (wp != std::string::npos)
            sketch.canvas_size = std::atoi(tag.c_str() + wp + 7);
    }
    const double k = static_cast<double>(sketch.canvas_size);

    int path_index = 0;
    size_t pos = 0;
    while ((pos = document.find("<path", pos)) != std::string::npos) {
        size_t tag_end = document.find("/>", pos);
        if (tag_end == std::string::npos)
            throw SvgParseError("path " + std::to_string(path_index) + ": unterminated <path> element");
        std::string tag = document.substr(pos, tag_end - pos);
        std::string d = find_attr(tag, "d", path_index);

        size_t i = 0;
        skip_sep(d, i);
        if (i >= d.size() || (d[i] != 'M' && d[i] != 'm'))
            throw SvgParseError("path " + std::to_string(path_index) + ": 'd' must start with M");
        ++i;
        Stroke s;
        s.points[0].x = parse_number(d, i, path_index) / k;
        s.points[0].y = parse_number(d, i, path_index) / k;
        skip_sep(d, i);
        if (i >= d.size() || (d[i] != 'C' && d[i] != 'c'))
            throw SvgParseError("path " + std::to_string(path_index) + ": only single cubic segments (C) are supported");
        bool relative = (d[i] == 'c');
        ++i;
        for (int j = 1; j < 4; ++j) {
            double x = parse_number(d, i, path_index) / k;
            double y = parse_number(d, i, path_index) / k;
            s.points[j] = relative ? Vec2{s.points[0].x + x, s.points[0].y + y} : Vec2{x, y};
        }
        skip_sep(d, i);
        if (i < d.size())
            throw SvgParseError("path " + std::to_string(path_index) + ": trailing path data (multi-segment paths unsupported)");

        s.width = std::atof(find_attr(tag, "stroke-width", path_index).c_str());
        s.probability = 1.0;
        sketch.strokes.push_back(s);
        ++path_index;
        pos = tag_end + 2;
    }
    return sketch;
}

void write_svg_file(const std::string &path, const Sketch &sketch, double drop_threshold) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot open for writing: " + path);
    f << export_svg(sketch, drop_threshold);
}

Sketch read_svg_file(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return import_svg(ss.str());
}

} // namespace ssk
