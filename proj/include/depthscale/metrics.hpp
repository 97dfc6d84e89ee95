#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "depthscale/io.hpp"

namespace depthscale {

struct MetricReport {
    double abs_rel = 0.0;
    double sq_rel = 0.0;
    double rmse = 0.0;
    double rmse_log = 0.0;
    double log10 = 0.0;  // squared base-10 log difference (see MetricOptions)
    double delta1 = 0.0;
    double delta2 = 0.0;
    double delta3 = 0.0;
    long pixel_count = 0;
};

struct MetricOptions {
    float cap_lo = 0.001f;
    float cap_hi = 10.0f;
    // The published table defines log10 as the squared difference of
    // base-10 logs; much of the literature uses the absolute difference.
    // The squared form is the default here.
    bool log10_absolute = false;
};

// caps for a domain tag: indoor (0.001, 10), outdoor (0.001, 80); a
// surgical tag maps to the indoor caps
MetricOptions options_for_domain(const std::string& domain);

// All eight metrics over the valid pixels of gt within [cap_lo, cap_hi].
// Throws EmptyMaskError when nothing survives the caps.
MetricReport evaluate(const DepthRaster& pred, const DepthRaster& gt,
                      const std::vector<uint8_t>& mask, const MetricOptions& opts = {});

std::string metric_record_line(const std::string& id, const MetricReport& r);
std::string metric_table(const std::vector<std::pair<std::string, MetricReport>>& rows);

}  // namespace depthscale
