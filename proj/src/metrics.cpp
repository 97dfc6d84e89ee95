#include "depthscale/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "depthscale/errors.hpp"

namespace depthscale {

MetricOptions options_for_domain(const std::string& domain) {
    MetricOptions o;
    o.cap_hi = (domain == "outdoor") ? 80.0f : 10.0f;
    return o;
}

MetricReport evaluate(const DepthRaster& pred, const DepthRaster& gt,
                      const std::vector<uint8_t>& mask, const MetricOptions& opts) {
    if (pred.pixel_count() != gt.pixel_count() || mask.size() != gt.pixel_count())
        throw DimensionError("evaluate: raster sizes disagree");
    double abs_rel = 0.0, sq_rel = 0.0, sq_err = 0.0, sq_log = 0.0, l10 = 0.0;
    long d1 = 0, d2 = 0, d3 = 0, n = 0;
    for (size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i] || !gt.valid[i] || !pred.valid[i]) continue;
        const double g = gt.values[i];
        if (g < opts.cap_lo || g > opts.cap_hi) continue;
        const double p = pred.values[i];
        ++n;
        const double err = std::fabs(g - p);
        abs_rel += err / g;
        sq_rel += err * err / g;
        sq_err += err * err;
        const double log_err = std::log(g) - std::log(p);
        sq_log += log_err * log_err;
        const double l10_err = std::log10(p) - std::log10(g);
        l10 += opts.log10_absolute ? std::fabs(l10_err) : l10_err * l10_err;
        const double ratio = std::max(g / p, p / g);
        if (ratio < 1.25) ++d1;
        if (ratio < 1.25 * 1.25) ++d2;
        if (ratio < 1.25 * 1.25 * 1.25) ++d3;
    }
    if (n == 0) throw EmptyMaskError("evaluate: no valid pixels after caps");
    const double nd = static_cast<double>(n);
    MetricReport r;
    r.abs_rel = abs_rel / nd;
    r.sq_rel = sq_rel / nd;
    r.rmse = std::sqrt(sq_err / nd);
    r.rmse_log = std::sqrt(sq_log / nd);
    r.log10 = l10 / nd;
    r.delta1 = static_cast<double>(d1) / nd;
    r.delta2 = static_cast<double>(d2) / nd;
    r.delta3 = static_cast<double>(d3) / nd;
    r.pixel_count = n;
    return r;
}

std::string metric_record_line(const std::string& id, const MetricReport& r) {
    char buf[320];
    std::snprintf(buf, sizeof(buf),
                  "id=%s abs_rel=%.6f sq_rel=%.6f rmse=%.6f rmse_log=%.6f log10=%.6f "
                  "delta1=%.6f delta2=%.6f delta3=%.6f pixels=%ld",
                  id.c_str(), r.abs_rel, r.sq_rel, r.rmse, r.rmse_log, r.log10, r.delta1,
                  r.delta2, r.delta3, r.pixel_count);
    return buf;
}

std::string metric_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
    std::ostringstream out;
    char buf[320];
    std::snprintf(buf, sizeof(buf), "%-12s %9s %9s %9s %9s %9s %7s %7s %7s %8s", "sample",
                  "abs_rel", "sq_rel", "rmse", "rmse_log", "log10", "d1", "d2", "d3", "pixels");
    out << buf << '\n';
    for (const auto& [id, r] : rows) {
        std::snprintf(buf, sizeof(buf),
                      "%-12s %9.4f %9.4f %9.4f %9.4f %9.4f %7.4f %7.4f %7.4f %8ld", id.c_str(),
                      r.abs_rel, r.sq_rel, r.rmse, r.rmse_log, r.log10, r.delta1, r.delta2,
                      r.delta3, r.pixel_count);
        out << buf << '\n';
    }
    return out.str();
}

}  // namespace depthscale
