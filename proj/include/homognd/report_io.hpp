#ifndef HOMOGND_REPORT_IO_HPP
#define HOMOGND_REPORT_IO_HPP

#include <json.hpp>

#include <filesystem>

#include "homognd/rates.hpp"

namespace homognd {

/// Deterministic report serialization: config echo and library version, no
/// wall time (re-running a preset must reproduce the bytes).
inline nlohmann::ordered_json report_to_json(const RateReport& r) {
    nlohmann::ordered_json j;
    j["library_version"] = library_version;
    nlohmann::ordered_json cfg;
    cfg["label"] = r.config.label;
    cfg["coefficient"] = r.config.coefficient;
    cfg["rhs"] = r.config.rhs;
    cfg["backend"] = backend_name(r.config.backend);
    {
        nlohmann::ordered_json eps = nlohmann::ordered_json::array();
        for (int k : r.config.eps_inv) eps.push_back("1/" + std::to_string(k));
        cfg["epsilons"] = std::move(eps);
    }
    cfg["ps"] = r.config.ps;
    cfg["m_rule"] = r.config.m_rule;
    cfg["cell_n"] = r.config.cell_n;
    cfg["fine_m"] = r.config.fine_m;
    {
        nlohmann::ordered_json fns = nlohmann::ordered_json::array();
        for (Functional f : r.config.functionals) fns.push_back(functional_name(f));
        cfg["functionals"] = std::move(fns);
    }
    cfg["oracles"] = {{"r", r.config.oracles.r},
                      {"V", r.config.oracles.v},
                      {"u", r.config.oracles.u},
                      {"z", r.config.oracles.z}};
    cfg["seed"] = r.config.seed;
    j["config"] = std::move(cfg);

    nlohmann::ordered_json prov;
    for (const auto& [k, v] : r.provenance) prov[k] = v;
    j["provenance"] = std::move(prov);

    nlohmann::ordered_json samples = nlohmann::ordered_json::array();
    for (const EpsSample& s : r.samples) {
        nlohmann::ordered_json js;
        js["epsilon"] = "1/" + std::to_string(s.eps_inv);
        js["eps_value"] = 1.0 / s.eps_inv;
        js["m"] = s.m;
        nlohmann::ordered_json vals = nlohmann::ordered_json::array();
        for (const FunctionalValue& v : s.values) {
            nlohmann::ordered_json jv;
            jv["functional"] = functional_name(v.kind);
            if (functional_has_p(v.kind)) jv["p"] = v.p;
            jv["value"] = v.value;
            vals.push_back(std::move(jv));
        }
        js["values"] = std::move(vals);
        samples.push_back(std::move(js));
    }
    j["samples"] = std::move(samples);

    nlohmann::ordered_json fits = nlohmann::ordered_json::array();
    for (const FitEntry& f : r.fits) {
        nlohmann::ordered_json jf;
        jf["functional"] = functional_name(f.kind);
        if (functional_has_p(f.kind)) jf["p"] = f.p;
        jf["slope"] = f.fit.slope;
        jf["intercept"] = f.fit.intercept;
        jf["r_squared"] = f.fit.r_squared;
        jf["points_used"] = f.fit.points_used;
        fits.push_back(std::move(jf));
    }
    j["fits"] = std::move(fits);
    j["zero_samples"] = r.zero_samples;
    return j;
}

/// CSV table: provenance comment lines, then epsilon,functional,p,value.
inline std::string report_to_csv(const RateReport& r) {
    std::string out;
    out += "# homognd " + std::string(library_version) + "\n";
    out += "# config: label=" + r.config.label + " coefficient=" + r.config.coefficient +
           " rhs=" + r.config.rhs + " backend=" + backend_name(r.config.backend) +
           " m_rule=" + std::to_string(r.config.m_rule) + "\n";
    out += "epsilon,functional,p,value\n";
    for (const EpsSample& s : r.samples)
        for (const FunctionalValue& v : s.values) {
            out += "1/" + std::to_string(s.eps_inv) + "," + functional_name(v.kind) + ",";
            if (functional_has_p(v.kind)) {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%g", v.p);
                out += buf;
            } else {
                out += "inf";
            }
            out += "," + detail::fmt17(v.value) + "\n";
        }
    return out;
}

// ---------------------------------------------------------------------------
// SVG log-log plots

namespace detail {

struct PlotSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;  // (eps, value), value > 0
    bool has_fit = false;
    double slope = 0.0, intercept = 0.0;
};

inline std::string svg_loglog_plot(const std::string& title,
                                   const std::vector<PlotSeries>& series) {
    static const char* colors[] = {"#1f6fb4", "#d03030", "#2c8a42", "#9349b8",
                                   "#c08a00", "#406070"};
    const double W = 680, H = 500, L = 80, R = 40, T = 50, B = 60;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (!(xmin < xmax)) {
        xmin /= 2;
        xmax = 2 * std::max(xmax, 1e-300);
    }
    if (!(ymin < ymax)) {
        ymin /= 2;
        ymax = 2 * std::max(ymax, 1e-300);
    }
    const double lx0 = std::log10(xmin) - 0.05, lx1 = std::log10(xmax) + 0.05;
    const double ly0 = std::log10(ymin) - 0.15, ly1 = std::log10(ymax) + 0.15;
    auto X = [&](double v) { return L + (std::log10(v) - lx0) / (lx1 - lx0) * (W - L - R); };
    auto Y = [&](double v) { return H - B - (std::log10(v) - ly0) / (ly1 - ly0) * (H - T - B); };
    auto num = [](double v) {
        char b[32];
        std::snprintf(b, sizeof(b), "%.6g", v);
        return std::string(b);
    };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" +
           num(H) + "\" viewBox=\"0 0 " + num(W) + " " + num(H) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + num(W / 2) + "\" y=\"28\" text-anchor=\"middle\" font-size=\"16\" "
           "font-family=\"sans-serif\">" + title + "</text>\n";
    // decade grid
    for (int e = static_cast<int>(std::floor(ly0)); e <= static_cast<int>(std::ceil(ly1)); ++e) {
        const double v = std::pow(10.0, e);
        if (std::log10(v) < ly0 || std::log10(v) > ly1) continue;
        svg += "<line x1=\"" + num(L) + "\" y1=\"" + num(Y(v)) + "\" x2=\"" + num(W - R) +
               "\" y2=\"" + num(Y(v)) + "\" stroke=\"#dddddd\"/>\n";
        svg += "<text x=\"" + num(L - 8) + "\" y=\"" + num(Y(v) + 4) +
               "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">1e" +
               std::to_string(e) + "</text>\n";
    }
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            (void)y;
            svg += "<line x1=\"" + num(X(x)) + "\" y1=\"" + num(H - B) + "\" x2=\"" + num(X(x)) +
                   "\" y2=\"" + num(T) + "\" stroke=\"#eeeeee\"/>\n";
        }
    // axes
    svg += "<line x1=\"" + num(L) + "\" y1=\"" + num(H - B) + "\" x2=\"" + num(W - R) +
           "\" y2=\"" + num(H - B) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + num(L) + "\" y1=\"" + num(H - B) + "\" x2=\"" + num(L) + "\" y2=\"" +
           num(T) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + num(W / 2) + "\" y=\"" + num(H - 18) +
           "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">epsilon"
           "</text>\n";

    int ci = 0;
    double legend_y = T + 14;
    for (const auto& s : series) {
        const char* color = colors[ci % 6];
        ++ci;
        // epsilon tick labels from the first series
        if (ci == 1)
            for (const auto& [x, y] : s.points) {
                (void)y;
                svg += "<text x=\"" + num(X(x)) + "\" y=\"" + num(H - B + 16) +
                       "\" text-anchor=\"middle\" font-size=\"11\" "
                       "font-family=\"sans-serif\">" + num(x) + "</text>\n";
            }
        std::string poly;
        for (const auto& [x, y] : s.points) poly += num(X(x)) + "," + num(Y(y)) + " ";
        svg += "<polyline points=\"" + poly + "\" fill=\"none\" stroke=\"" + color +
               "\" stroke-width=\"1.5\"/>\n";
        for (const auto& [x, y] : s.points)
            svg += "<circle cx=\"" + num(X(x)) + "\" cy=\"" + num(Y(y)) + "\" r=\"3.5\" fill=\"" +
                   color + "\"/>\n";
        if (s.has_fit) {
            const double y0 = std::exp(s.intercept + s.slope * std::log(xmin));
            const double y1v = std::exp(s.intercept + s.slope * std::log(xmax));
            svg += "<line x1=\"" + num(X(xmin)) + "\" y1=\"" + num(Y(y0)) + "\" x2=\"" +
                   num(X(xmax)) + "\" y2=\"" + num(Y(y1v)) + "\" stroke=\"" + color +
                   "\" stroke-dasharray=\"6 4\"/>\n";
        }
        std::string label = s.name;
        if (s.has_fit) {
            char buf[48];
            std::snprintf(buf, sizeof(buf), " (slope %.3f)", s.slope);
            label += buf;
        }
        svg += "<text x=\"" + num(W - R - 6) + "\" y=\"" + num(legend_y) +
               "\" text-anchor=\"end\" font-size=\"12\" font-family=\"sans-serif\" fill=\"" +
               color + "\">" + label + "</text>\n";
        legend_y += 16;
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace detail

/// One SVG per functional: the per-p curves (or the single sup-norm curve)
/// with their fitted lines and slope annotations.
inline std::map<std::string, std::string> report_to_svgs(const RateReport& r) {
    std::map<std::string, std::string> out;
    std::vector<Functional> seen;
    for (Functional f : r.config.functionals) {
        if (std::find(seen.begin(), seen.end(), f) != seen.end()) continue;
        seen.push_back(f);
        std::vector<double> ps = functional_has_p(f) ? r.config.ps : std::vector<double>{0.0};
        std::vector<detail::PlotSeries> series;
        for (double p : ps) {
            detail::PlotSeries s;
            s.name = functional_name(f);
            if (functional_has_p(f)) {
                char buf[24];
                std::snprintf(buf, sizeof(buf), ", p=%g", p);
                s.name += buf;
            }
            for (const EpsSample& smp : r.samples)
                for (const FunctionalValue& v : smp.values)
                    if (v.kind == f && v.p == p && v.value > 0.0)
                        s.points.emplace_back(1.0 / smp.eps_inv, v.value);
            std::sort(s.points.begin(), s.points.end());
            for (const FitEntry& fe : r.fits)
                if (fe.kind == f && fe.p == p) {
                    s.has_fit = true;
                    s.slope = fe.fit.slope;
                    s.intercept = fe.fit.intercept;
                }
            if (!s.points.empty()) series.push_back(std::move(s));
        }
        if (series.empty()) continue;
        const std::string title = r.config.label + ": " + functional_name(f) + " vs epsilon";
        out[functional_name(f)] = detail::svg_loglog_plot(title, series);
    }
    return out;
}

/// Write <label>.json, <label>.csv and plot-<functional>-<label>.svg into
/// dir (created if needed). Returns the file paths written.
inline std::vector<std::string> write_report(const RateReport& r, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<std::string> written;
    const std::string base = (fs::path(dir) / r.config.label).string();
    {
        std::ofstream os(base + ".json", std::ios::binary);
        os << report_to_json(r).dump(2) << '\n';
        written.push_back(base + ".json");
    }
    {
        std::ofstream os(base + ".csv", std::ios::binary);
        os << report_to_csv(r);
        written.push_back(base + ".csv");
    }
    for (const auto& [fn, svg] : report_to_svgs(r)) {
        const std::string path =
            (fs::path(dir) / ("plot-" + fn + "-" + r.config.label + ".svg")).string();
        std::ofstream os(path, std::ios::binary);
        os << svg;
        written.push_back(path);
    }
    return written;
}

}  // namespace homognd

#endif  // HOMOGND_REPORT_IO_HPP
