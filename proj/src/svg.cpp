#include "dhtm/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dhtm {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

}  // namespace

std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label,
                              const std::vector<PlotSeries>& series, int width, int height) {
    const double ml = 64, mr = 16, mt = 36, mb = 46;  // margins
    const double pw = width - ml - mr, ph = height - mt - mb;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (std::isnan(s.y[i])) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (!(xmin < xmax)) {
        xmin -= 1;
        xmax += 1;
    }
    if (!(ymin < ymax)) {
        ymin -= 1;
        ymax += 1;
    }
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\" "
        << "font-family=\"sans-serif\">" << title << "</text>\n";
    svg << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"#333\"/>\n";

    for (int i = 0; i <= 4; ++i) {
        const double fx = xmin + (xmax - xmin) * i / 4.0;
        const double fy = ymin + (ymax - ymin) * i / 4.0;
        svg << "<line x1=\"" << sx(fx) << "\" y1=\"" << mt + ph << "\" x2=\"" << sx(fx)
            << "\" y2=\"" << mt + ph + 4 << "\" stroke=\"#333\"/>\n";
        svg << "<text x=\"" << sx(fx) << "\" y=\"" << mt + ph + 16
            << "\" text-anchor=\"middle\" font-size=\"10\" font-family=\"sans-serif\">" << fmt(fx)
            << "</text>\n";
        svg << "<line x1=\"" << ml - 4 << "\" y1=\"" << sy(fy) << "\" x2=\"" << ml << "\" y2=\""
            << sy(fy) << "\" stroke=\"#333\"/>\n";
        svg << "<text x=\"" << ml - 6 << "\" y=\"" << sy(fy) + 3
            << "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">" << fmt(fy)
            << "</text>\n";
    }
    svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 8
        << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << x_label
        << "</text>\n";
    svg << "<text x=\"14\" y=\"" << mt + ph / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\" "
        << "transform=\"rotate(-90 14 " << mt + ph / 2 << ")\">" << y_label << "</text>\n";

    for (const auto& s : series) {
        svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\""
            << s.stroke_width << "\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (std::isnan(s.y[i])) continue;
            if (!first) svg << ' ';
            svg << fmt(sx(s.x[i])) << ',' << fmt(sy(s.y[i]));
            first = false;
        }
        svg << "\"/>\n";
    }

    double ly = mt + 14;
    for (const auto& s : series) {
        if (s.label.empty()) continue;
        svg << "<line x1=\"" << ml + pw - 110 << "\" y1=\"" << ly - 4 << "\" x2=\""
            << ml + pw - 90 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << s.color
            << "\" stroke-width=\"" << s.stroke_width << "\"/>\n";
        svg << "<text x=\"" << ml + pw - 84 << "\" y=\"" << ly
            << "\" font-size=\"10\" font-family=\"sans-serif\">" << s.label << "</text>\n";
        ly += 14;
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace dhtm
