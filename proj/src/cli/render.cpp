#include "bandlime/render.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "bandlime/error.hpp"

namespace bandlime {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 70.0;
constexpr double kTop = 40.0;
constexpr double kPlotW = 600.0;
constexpr double kPlotH = 380.0;

constexpr std::size_t kMaxHeatCols = 160;
constexpr std::size_t kMaxHeatRows = 128;
constexpr double kDynamicRangeDb = 80.0;

std::string num(double v, int digits = 3) {
  // Avoid "-0.000".
  const double scale = std::pow(10.0, digits);
  double r = std::round(v * scale) / scale;
  if (r == 0.0) r = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, r);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

bool is_hex_color(const std::string& s) {
  return s.size() == 7 && s[0] == '#' &&
         std::all_of(s.begin() + 1, s.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
}

// Dark-blue -> yellow ramp for the heatmap.
std::string heat_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(20 + t * (253 - 20)));
  const int g = static_cast<int>(std::lround(12 + t * (231 - 12)));
  const int b = static_cast<int>(std::lround(90 + t * (37 - 90)));
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

void open_svg(std::ostringstream& out, const std::string& title) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth, 0) << "\" height=\""
      << num(kHeight, 0) << "\" viewBox=\"0 0 " << num(kWidth, 0) << ' ' << num(kHeight, 0)
      << "\">\n"
      << "  <title>" << escape(title) << "</title>\n"
      << "  <rect x=\"0\" y=\"0\" width=\"" << num(kWidth, 0) << "\" height=\"" << num(kHeight, 0)
      << "\" fill=\"#ffffff\"/>\n"
      << "  <text x=\"" << num(kWidth / 2, 1) << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"15\">" << escape(title) << "</text>\n";
}

void heatmap(std::ostringstream& out, const Spectrogram& spec) {
  const std::size_t cols = std::min(spec.n_frames(), kMaxHeatCols);
  const std::size_t rows = std::min(spec.n_bins(), kMaxHeatRows);
  std::vector<double> db(cols * rows, 0.0);
  double peak = -1e300;
  for (std::size_t c = 0; c < cols; ++c) {
    const std::size_t f0 = c * spec.n_frames() / cols;
    const std::size_t f1 = (c + 1) * spec.n_frames() / cols;
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t b0 = r * spec.n_bins() / rows;
      const std::size_t b1 = (r + 1) * spec.n_bins() / rows;
      double power = 0.0;
      for (std::size_t f = f0; f < f1; ++f) {
        for (std::size_t b = b0; b < b1; ++b) power += std::norm(spec.at(f, b));
      }
      power /= static_cast<double>((f1 - f0) * (b1 - b0));
      const double v = 10.0 * std::log10(power + 1e-20);
      db[c * rows + r] = v;
      peak = std::max(peak, v);
    }
  }
  const double cell_w = kPlotW / static_cast<double>(cols);
  const double cell_h = kPlotH / static_cast<double>(rows);
  out << "  <g class=\"heatmap\" shape-rendering=\"crispEdges\">\n";
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) {
      const double t = (db[c * rows + r] - (peak - kDynamicRangeDb)) / kDynamicRangeDb;
      // Row 0 (DC) at the bottom.
      const double y = kTop + kPlotH - static_cast<double>(r + 1) * cell_h;
      out << "    <rect x=\"" << num(kLeft + static_cast<double>(c) * cell_w, 2) << "\" y=\""
          << num(y, 2) << "\" width=\"" << num(cell_w + 0.05, 2) << "\" height=\""
          << num(cell_h + 0.05, 2) << "\" fill=\"" << heat_color(t) << "\"/>\n";
    }
  }
  out << "  </g>\n";
}

}  // namespace

void RenderSpec::validate() const {
  if (!is_hex_color(positive_color) || !is_hex_color(negative_color)) {
    throw InvalidArgument("colours must be 6-digit hex values like #00ff00");
  }
}

std::string render_explanation_svg(const Explanation& e, const std::optional<Spectrogram>& spectrogram,
                                   const RenderSpec& spec) {
  spec.validate();
  const std::size_t d = e.n_components();
  if (d == 0 || e.band_edges_hz.size() != d + 1) {
    throw InvalidArgument("explanation band edges do not match its weights");
  }
  const double nyquist = e.band_edges_hz.back();
  double max_abs = 0.0;
  for (double w : e.weights) max_abs = std::max(max_abs, std::abs(w));

  std::ostringstream out;
  open_svg(out, "Explanation for class '" + e.target_class + "'");
  out << "  <g class=\"plot\" data-mode=\"single\" data-left=\"" << num(kLeft, 1) << "\" data-top=\""
      << num(kTop, 1) << "\" data-width=\"" << num(kPlotW, 1) << "\" data-height=\""
      << num(kPlotH, 1) << "\" data-nyquist-hz=\"" << num(nyquist, 3) << "\">\n";
  out << "  <rect x=\"" << num(kLeft, 1) << "\" y=\"" << num(kTop, 1) << "\" width=\"" << num(kPlotW, 1)
      << "\" height=\"" << num(kPlotH, 1) << "\" fill=\"#101020\"/>\n";
  if (spectrogram) heatmap(out, *spectrogram);

  auto freq_y = [&](double hz) { return kTop + kPlotH * (1.0 - hz / nyquist); };

  out << "  <g class=\"bands\">\n";
  for (std::size_t k = 0; k < d; ++k) {
    const double w = e.weights[k];
    const double y0 = freq_y(e.band_edges_hz[k + 1]);
    const double y1 = freq_y(e.band_edges_hz[k]);
    const double opacity = max_abs > 0.0 ? std::abs(w) / max_abs : 0.0;
    const std::string& color = w < 0.0 ? spec.negative_color : spec.positive_color;
    out << "    <rect class=\"band-stripe\" data-band=\"" << k << "\" data-weight=\"" << num(w, 6)
        << "\" x=\"" << num(kLeft, 2) << "\" y=\"" << num(y0, 2) << "\" width=\"" << num(kPlotW, 2)
        << "\" height=\"" << num(y1 - y0, 2) << "\" fill=\"" << color << "\" fill-opacity=\""
        << num(0.6 * opacity, 4) << "\" stroke=\"#ffffff\" stroke-opacity=\"0.4\" stroke-width=\"0.5\"/>\n";
    if (spec.annotate_weights) {
      out << "    <text class=\"weight-label\" data-band=\"" << k << "\" x=\""
          << num(kLeft + kPlotW - 8.0, 2) << "\" y=\"" << num((y0 + y1) / 2.0 + 5.0, 2)
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"14\" fill=\"#ffffff\">"
          << num(w, 2) << "</text>\n";
    }
  }
  out << "  </g>\n";

  out << "  <g class=\"axis\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#000000\">\n";
  for (double edge : e.band_edges_hz) {
    out << "    <text x=\"" << num(kLeft - 6.0, 1) << "\" y=\"" << num(freq_y(edge) + 4.0, 2)
        << "\" text-anchor=\"end\">" << num(edge / 1000.0, 2) << "</text>\n";
  }
  out << "    <text x=\"16\" y=\"" << num(kTop + kPlotH / 2, 1)
      << "\" transform=\"rotate(-90 16 " << num(kTop + kPlotH / 2, 1)
      << ")\" text-anchor=\"middle\">Frequency (kHz)</text>\n"
      << "    <text x=\"" << num(kLeft + kPlotW / 2, 1) << "\" y=\"" << num(kTop + kPlotH + 24, 1)
      << "\" text-anchor=\"middle\">Time</text>\n"
      << "  </g>\n";
  out << "  </g>\n</svg>\n";
  return out.str();
}

std::string render_aggregate_svg(const EmotionAggregate& a, const RenderSpec& spec) {
  spec.validate();
  const std::size_t d = a.mean_weights.size();
  if (d == 0 || a.std_weights.size() != d) throw InvalidArgument("aggregate has no components");

  double extent = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    extent = std::max(extent, std::abs(a.mean_weights[k]) + a.std_weights[k]);
  }
  const double px_per_unit = extent > 0.0 ? 0.9 * (kPlotH / 2.0) / extent : 1.0;
  const double zero_y = kTop + kPlotH / 2.0;
  const double slot = kPlotW / static_cast<double>(d);

  std::ostringstream out;
  open_svg(out, "Mean explanation weights: " + a.emotion + " (n=" +
                    std::to_string(a.n_utterances()) + ")");
  out << "  <g class=\"plot\" data-mode=\"aggregate\" data-left=\"" << num(kLeft, 1)
      << "\" data-top=\"" << num(kTop, 1) << "\" data-width=\"" << num(kPlotW, 1)
      << "\" data-height=\"" << num(kPlotH, 1) << "\" data-zero-y=\"" << num(zero_y, 3)
      << "\" data-px-per-unit=\"" << num(px_per_unit, 6) << "\">\n";
  out << "    <line class=\"zero-line\" x1=\"" << num(kLeft, 1) << "\" y1=\"" << num(zero_y, 3)
      << "\" x2=\"" << num(kLeft + kPlotW, 1) << "\" y2=\"" << num(zero_y, 3)
      << "\" stroke=\"#000000\" stroke-width=\"1\"/>\n";

  for (std::size_t k = 0; k < d; ++k) {
    const double mean = a.mean_weights[k];
    const double sd = a.std_weights[k];
    const double x = kLeft + static_cast<double>(k) * slot + 0.15 * slot;
    const double bar_w = 0.7 * slot;
    const double h = std::abs(mean) * px_per_unit;
    const double y = mean >= 0.0 ? zero_y - h : zero_y;
    const std::string& color = mean < 0.0 ? spec.negative_color : spec.positive_color;
    const double cx = x + bar_w / 2.0;
    out << "    <rect class=\"bar\" data-band=\"" << k << "\" x=\"" << num(x) << "\" y=\"" << num(y)
        << "\" width=\"" << num(bar_w) << "\" height=\"" << num(h) << "\" fill=\"" << color
        << "\"/>\n";
    out << "    <line class=\"error-bar\" data-band=\"" << k << "\" x1=\"" << num(cx) << "\" y1=\""
        << num(zero_y - (mean + sd) * px_per_unit) << "\" x2=\"" << num(cx) << "\" y2=\""
        << num(zero_y - (mean - sd) * px_per_unit)
        << "\" stroke=\"#000000\" stroke-width=\"1.5\"/>\n";
    if (spec.annotate_weights) {
      out << "    <text class=\"weight-label\" data-band=\"" << k << "\" x=\"" << num(cx)
          << "\" y=\"" << num(kTop + kPlotH + 16.0) << "\" text-anchor=\"middle\" "
          << "font-family=\"sans-serif\" font-size=\"11\">" << num(mean, 2) << "</text>\n";
    }
  }
  out << "  </g>\n</svg>\n";
  return out.str();
}

}  // namespace bandlime
