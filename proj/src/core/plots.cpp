// Dependency-free SVG rendering of sweep observables. Output is a pure
// function of the inputs so identical data yields identical bytes.

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "ksatlab/experiment.hpp"

namespace fs = std::filesystem;

namespace ksat::experiment {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 64.0;
constexpr double kRight = 24.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 56.0;

constexpr std::string_view kClaimedColour = "#2ca02c";
constexpr std::string_view kVerifiedColour = "#1f77b4";
constexpr std::string_view kBaselineColour = "#ff7f0e";
constexpr std::string_view kReferenceColour = "#d62728";

// Fixed-precision coordinates keep the byte stream platform independent.
std::string num(double x) {
  if (std::abs(x) < 5e-4)
    x = 0.0;
  return fmt::format("{:.3f}", x);
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;

  void include(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  // Guarantees hi > lo so the axis mapping is well defined.
  void pad(double fraction) {
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
      return;
    }
    const double d = (hi - lo) * fraction;
    lo -= d;
    hi += d;
  }
};

class Canvas {
public:
  Canvas(Range x, Range y) : x_(x), y_(y) {}

  double px(double v) const {
    return kLeft + (v - x_.lo) / (x_.hi - x_.lo) * (kWidth - kLeft - kRight);
  }
  double py(double v) const {
    return kHeight - kBottom - (v - y_.lo) / (y_.hi - y_.lo) * (kHeight - kTop - kBottom);
  }

  void open(std::string_view title) {
    out_ += fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
        "viewBox=\"0 0 {0} {1}\">\n",
        static_cast<int>(kWidth), static_cast<int>(kHeight));
    out_ += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out_ += fmt::format("<text x=\"{}\" y=\"24\" text-anchor=\"middle\" "
                        "font-family=\"sans-serif\" font-size=\"15\">{}</text>\n",
                        num(kWidth / 2), title);
  }

  void axes(std::string_view x_label, std::string_view y_label) {
    const double x0 = kLeft, x1 = kWidth - kRight;
    const double y0 = kHeight - kBottom, y1 = kTop;
    out_ += fmt::format("<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n"
                        "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\"/>\n"
                        "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{3}\"/>\n</g>\n",
                        num(x0), num(y0), num(x1), num(y1));
    out_ += "<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int i = 0; i <= 5; ++i) {
      const double xv = x_.lo + (x_.hi - x_.lo) * i / 5.0;
      const double yv = y_.lo + (y_.hi - y_.lo) * i / 5.0;
      out_ += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" "
                          "stroke=\"black\"/>\n",
                          num(px(xv)), num(y0), num(y0 + 4));
      out_ += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.2f}</text>\n",
                          num(px(xv)), num(y0 + 17), xv);
      out_ += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" "
                          "stroke=\"black\"/>\n",
                          num(x0 - 4), num(py(yv)), num(x0));
      out_ += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3g}</text>\n",
                          num(x0 - 7), num(py(yv) + 4), yv);
    }
    out_ += "</g>\n";
    out_ += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" "
                        "font-family=\"sans-serif\" font-size=\"13\">{}</text>\n",
                        num((x0 + x1) / 2), num(kHeight - 14), x_label);
    out_ += fmt::format("<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" "
                        "font-family=\"sans-serif\" font-size=\"13\" "
                        "transform=\"rotate(-90 16 {0})\">{1}</text>\n",
                        num((y0 + y1) / 2), y_label);
  }

  struct Sample {
    double x;
    double y;
    double err;
  };

  void series(std::string_view cls, std::string_view colour,
              const std::vector<Sample> &samples) {
    if (samples.empty())
      return;
    out_ += fmt::format("<g class=\"series {}\" stroke=\"{}\" fill=\"{}\">\n", cls,
                        colour, colour);
    if (samples.size() > 1) {
      out_ += "<polyline fill=\"none\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < samples.size(); ++i)
        out_ += fmt::format("{}{},{}", i ? " " : "", num(px(samples[i].x)),
                            num(py(samples[i].y)));
      out_ += "\"/>\n";
    }
    for (const auto &s : samples) {
      const double x = px(s.x);
      out_ += fmt::format("<line class=\"error-bar\" x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" "
                          "y2=\"{2}\" stroke-width=\"1\"/>\n",
                          num(x), num(py(s.y - s.err)), num(py(s.y + s.err)));
      out_ += fmt::format("<circle class=\"marker\" cx=\"{}\" cy=\"{}\" r=\"3\" "
                          "data-x=\"{}\" data-y=\"{}\"/>\n",
                          num(x), num(py(s.y)), fmt::format("{:g}", s.x),
                          fmt::format("{:.6g}", s.y));
    }
    out_ += "</g>\n";
  }

  void legend(const std::vector<std::pair<std::string_view, std::string_view>> &items) {
    out_ += "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"11\">\n";
    double y = kTop + 8;
    for (const auto &[label, colour] : items) {
      const double x = kWidth - kRight - 150;
      out_ += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" "
                          "fill=\"{}\"/>\n<text x=\"{}\" y=\"{}\">{}</text>\n",
                          num(x), num(y - 9), colour, num(x + 15), num(y), label);
      y += 16;
    }
    out_ += "</g>\n";
  }

  void append(std::string_view raw) { out_ += raw; }

  std::string close() {
    out_ += "</svg>\n";
    return std::move(out_);
  }

private:
  Range x_;
  Range y_;
  std::string out_;
};

std::vector<SweepPoint> sorted_by_alpha(std::span<const SweepPoint> points) {
  std::vector<SweepPoint> out(points.begin(), points.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const auto &a, const auto &b) { return a.alpha < b.alpha; });
  return out;
}

Range alpha_range(std::span<const SweepPoint> a, std::span<const SweepPoint> b) {
  Range r{a.empty() ? 0.0 : a.front().alpha, a.empty() ? 0.0 : a.front().alpha};
  for (const auto &p : a)
    r.include(p.alpha);
  for (const auto &p : b)
    r.include(p.alpha);
  return r;
}

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out)
    throw Error(ErrorCode::Io, "cannot write " + path.string());
}

} // namespace

std::string render_psat_svg(std::int32_t k, std::span<const SweepPoint> points,
                            std::span<const SweepPoint> baseline,
                            std::optional<double> alpha_s) {
  if (points.empty() && baseline.empty())
    throw Error(ErrorCode::InvalidArgument, "P(SAT) plot needs at least one point");
  const auto pts = sorted_by_alpha(points);
  const auto base = sorted_by_alpha(baseline);
  Range xr = pts.empty() ? alpha_range(base, {}) : alpha_range(pts, base);
  if (alpha_s)
    xr.include(*alpha_s);
  xr.pad(0.05);
  Range yr{-0.05, 1.05};

  Canvas c(xr, yr);
  c.open(fmt::format("P(SAT) vs alpha, K={}", k));
  c.axes("alpha = M/N", "P(SAT)");

  std::vector<Canvas::Sample> claimed, verified, reference;
  for (const auto &p : pts) {
    claimed.push_back({p.alpha, p.claimed_mean, p.claimed_stderr});
    verified.push_back({p.alpha, p.p_sat_mean, p.p_sat_stderr});
  }
  for (const auto &p : base)
    reference.push_back({p.alpha, p.p_sat_mean, p.p_sat_stderr});
  c.series("claimed", kClaimedColour, claimed);
  c.series("verified", kVerifiedColour, verified);
  c.series("baseline", kBaselineColour, reference);

  if (alpha_s) {
    c.append(fmt::format("<line class=\"alpha-s\" data-value=\"{}\" x1=\"{}\" y1=\"{}\" "
                         "x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-dasharray=\"6 4\"/>\n",
                         fmt::format("{:g}", *alpha_s), num(c.px(*alpha_s)),
                         num(c.py(yr.lo)), num(c.px(*alpha_s)), num(c.py(yr.hi)),
                         kReferenceColour));
  }
  std::vector<std::pair<std::string_view, std::string_view>> legend;
  if (!claimed.empty()) {
    legend.emplace_back("claimed", kClaimedColour);
    legend.emplace_back("verified", kVerifiedColour);
  }
  if (!reference.empty())
    legend.emplace_back("baseline solver", kBaselineColour);
  c.legend(legend);
  return c.close();
}

std::string render_h_svg(std::int32_t k, std::span<const SweepPoint> points) {
  const auto pts = sorted_by_alpha(points);
  std::vector<Canvas::Sample> samples;
  for (const auto &p : pts)
    if (p.h_mean)
      samples.push_back({p.alpha, *p.h_mean, p.h_stderr});
  if (samples.empty())
    throw Error(ErrorCode::InvalidArgument, "H plot needs at least one point with H");

  const double ref = random_baseline(k);
  Range xr{samples.front().x, samples.front().x};
  Range yr{0.0, ref};
  for (const auto &s : samples) {
    xr.include(s.x);
    yr.include(s.y + s.err);
    yr.include(s.y - s.err);
  }
  xr.pad(0.05);
  yr.lo = std::min(yr.lo, 0.0);
  yr.pad(0.08);

  Canvas c(xr, yr);
  c.open(fmt::format("Unsatisfied clause fraction H vs alpha, K={}", k));
  c.axes("alpha = M/N", "H");
  c.append(fmt::format("<line class=\"random-baseline\" data-value=\"{}\" x1=\"{}\" "
                       "y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" "
                       "stroke-dasharray=\"6 4\"/>\n",
                       fmt::format("{:g}", ref), num(c.px(xr.lo)), num(c.py(ref)),
                       num(c.px(xr.hi)), num(c.py(ref)), kReferenceColour));
  c.series("h", kVerifiedColour, samples);
  c.legend({{"H (mean)", kVerifiedColour}, {"2^-K", kReferenceColour}});
  return c.close();
}

std::string render_solver_calls_svg(std::int32_t k,
                                    const std::map<double, std::size_t> &histogram) {
  if (histogram.empty())
    throw Error(ErrorCode::InvalidArgument, "solver-call plot needs at least one bin");
  std::size_t peak = 1;
  for (const auto &[alpha, count] : histogram)
    peak = std::max(peak, count);

  const double bins = static_cast<double>(histogram.size());
  Range xr{-0.5, bins - 0.5};
  Range yr{0.0, static_cast<double>(peak) * 1.1};
  Canvas c(xr, yr);
  c.open(fmt::format("Transcripts with solver calls, K={}", k));
  c.axes("alpha (bin index)", "count");

  c.append(fmt::format("<g class=\"bars\" fill=\"{}\" font-family=\"sans-serif\" "
                       "font-size=\"10\">\n",
                       kVerifiedColour));
  const double slot = c.px(1.0) - c.px(0.0);
  std::size_t i = 0;
  for (const auto &[alpha, count] : histogram) {
    const double centre = c.px(static_cast<double>(i));
    const double top = c.py(static_cast<double>(count));
    const double bottom = c.py(0.0);
    c.append(fmt::format("<rect class=\"bar\" data-alpha=\"{}\" data-count=\"{}\" "
                         "x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/>\n",
                         fmt::format("{:g}", alpha), count, num(centre - slot * 0.35),
                         num(top), num(slot * 0.7), num(bottom - top)));
    c.append(fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" "
                         "fill=\"black\">{:g}</text>\n",
                         num(centre), num(bottom + 30), alpha));
    ++i;
  }
  c.append("</g>\n");
  return c.close();
}

std::vector<fs::path> emit_plots(const ResultSet &results, const fs::path &out_dir,
                                 const ThresholdTable &thresholds) {
  fs::create_directories(out_dir);
  std::map<std::int32_t, std::vector<SweepPoint>> points_by_k, baseline_by_k;
  for (const auto &p : results.points)
    points_by_k[p.k].push_back(p);
  for (const auto &p : results.baseline_points)
    baseline_by_k[p.k].push_back(p);
  std::set<std::int32_t> ks;
  for (const auto &[k, v] : points_by_k)
    ks.insert(k);
  for (const auto &[k, v] : baseline_by_k)
    ks.insert(k);

  std::vector<fs::path> written;
  for (auto k : ks) {
    const auto &pts = points_by_k[k];
    const auto &base = baseline_by_k[k];
    std::optional<double> alpha_s;
    if (thresholds.contains(k))
      alpha_s = thresholds.at(k);
    auto psat = out_dir / fmt::format("psat_k{}.svg", k);
    write_text(psat, render_psat_svg(k, pts, base, alpha_s));
    written.push_back(psat);

    const auto &h_source = pts.empty() ? base : pts;
    if (std::any_of(h_source.begin(), h_source.end(),
                    [](const auto &p) { return p.h_mean.has_value(); })) {
      auto h = out_dir / fmt::format("h_k{}.svg", k);
      write_text(h, render_h_svg(k, h_source));
      written.push_back(h);
    }
  }
  for (const auto &[k, histogram] : results.solver_calls) {
    if (histogram.empty())
      continue;
    auto path = out_dir / fmt::format("solvercalls_k{}.svg", k);
    write_text(path, render_solver_calls_svg(k, histogram));
    written.push_back(path);
  }
  return written;
}

} // namespace ksat::experiment
