#pragma once

// Intersection-based PSDS scoring: DTC/GTC/CTTC matching per operating
// point, per-class TPR and effective FPR, the PSD-ROC built from support
// curves, and the normalized area under the effective TPR. All criteria
// comparisons are inclusive (>=); the AUC is an exact step-function sum.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sedkit/errors.hpp"
#include "sedkit/events.hpp"

namespace sedkit {

struct PsdsParams {
  double dtc = 0.7;             // detection tolerance criterion
  double gtc = 0.7;             // ground truth intersection criterion
  std::optional<double> cttc;   // cross-trigger tolerance criterion
  double alpha_st = 1.0;        // cost of class instability
  double alpha_ct = 0.0;        // cost of cross-triggers
  double e_max = 100.0;         // max effective FP rate, per hour

  void validate() const {
    if (!(dtc > 0.0 && dtc <= 1.0)) throw ConfigError("psds: dtc must be in (0,1]");
    if (!(gtc > 0.0 && gtc <= 1.0)) throw ConfigError("psds: gtc must be in (0,1]");
    if (cttc && !(*cttc > 0.0 && *cttc <= 1.0)) throw ConfigError("psds: cttc must be in (0,1]");
    if (alpha_st < 0.0 || alpha_ct < 0.0) throw ConfigError("psds: alpha costs must be >= 0");
    if (!(e_max > 0.0)) throw ConfigError("psds: e_max must be positive");
    if ((alpha_ct > 0.0) != cttc.has_value())
      throw ConfigError("psds: cttc must be present exactly when alpha_ct > 0");
  }
};

struct GroundTruth {
  ClipEvents events;
  std::map<std::string, double> clip_durations;  // seconds

  double dataset_duration() const {
    double total = 0.0;
    for (const auto& [clip, dur] : clip_durations) total += dur;
    return total;
  }

  double class_duration(const std::string& label) const {
    double total = 0.0;
    for (const auto& [clip, list] : events)
      for (const auto& ev : list)
        if (ev.label == label) total += ev.offset - ev.onset;
    return total;
  }

  std::vector<std::string> classes() const {
    std::set<std::string> seen;
    for (const auto& [clip, list] : events)
      for (const auto& ev : list) seen.insert(ev.label);
    return {seen.begin(), seen.end()};
  }
};

struct OperatingPointCounts {
  double threshold = 0.0;
  std::map<std::string, std::int64_t> tp;
  std::map<std::string, std::int64_t> fp;
  // (detecting class, cross-triggered class) -> count; diagonal unused.
  std::map<std::pair<std::string, std::string>, std::int64_t> ct;
};

struct ClassRates {
  double tpr = 0.0;
  double efpr = 0.0;  // per hour
};

struct PsdsReport {
  double psds = 0.0;
  PsdsParams params;
  struct RocPoint {
    double efpr = 0.0;
    double tpr = 0.0;
  };
  std::map<std::string, std::vector<RocPoint>> curves;       // Pareto support points
  std::vector<OperatingPointCounts> op_counts;               // one per threshold
  std::vector<std::map<std::string, ClassRates>> op_rates;   // parallel to op_counts
};

namespace detail {

inline double intersection(const TimedEvent& a, const TimedEvent& b) {
  return std::max(0.0, std::min(a.offset, b.offset) - std::max(a.onset, b.onset));
}

}  // namespace detail

// DTC/GTC/CTTC matching of one detection set against the ground truth.
// A detection is DTC-valid when the summed intersection with same-class GT
// events covers at least `dtc` of it; invalid detections count as false
// positives and, when CTTC is configured, as cross-triggers against every
// other class whose GT events cover at least `cttc` of them. A GT event is
// a true positive when DTC-valid detections cover at least `gtc` of it.
inline OperatingPointCounts match_operating_point(const ClipEvents& detections, const GroundTruth& gt,
                                                  const PsdsParams& params,
                                                  const std::vector<std::string>& classes) {
  params.validate();
  const std::set<std::string> known(classes.begin(), classes.end());

  OperatingPointCounts counts;
  for (const auto& c : classes) {
    counts.tp[c] = 0;
    counts.fp[c] = 0;
  }

  for (const auto& [clip, dets] : detections) {
    if (gt.clip_durations.find(clip) == gt.clip_durations.end())
      throw DataError("detections reference unknown clip " + clip);
    for (const auto& d : dets)
      if (known.find(d.label) == known.end()) throw DataError("unknown class name " + d.label);
  }

  for (const auto& [clip, dur] : gt.clip_durations) {
    static const std::vector<TimedEvent> kNone;
    const auto dit = detections.find(clip);
    const auto git = gt.events.find(clip);
    const auto& dets = dit != detections.end() ? dit->second : kNone;
    const auto& gts = git != gt.events.end() ? git->second : kNone;

    for (const auto& c : classes) {
      std::vector<const TimedEvent*> dets_c, gts_c;
      for (const auto& d : dets)
        if (d.label == c) dets_c.push_back(&d);
      for (const auto& g : gts)
        if (g.label == c) gts_c.push_back(&g);

      std::vector<bool> valid(dets_c.size(), false);
      for (std::size_t i = 0; i < dets_c.size(); ++i) {
        const auto& d = *dets_c[i];
        double covered = 0.0;
        for (const auto* g : gts_c) covered += detail::intersection(d, *g);
        valid[i] = covered / (d.offset - d.onset) >= params.dtc;
        if (!valid[i]) ++counts.fp[c];
      }

      for (const auto* g : gts_c) {
        double covered = 0.0;
        for (std::size_t i = 0; i < dets_c.size(); ++i)
          if (valid[i]) covered += detail::intersection(*dets_c[i], *g);
        if (covered / (g->offset - g->onset) >= params.gtc) ++counts.tp[c];
      }

      if (params.cttc) {
        for (std::size_t i = 0; i < dets_c.size(); ++i) {
          if (valid[i]) continue;
          const auto& d = *dets_c[i];
          for (const auto& other : classes) {
            if (other == c) continue;
            double covered = 0.0;
            for (const auto& g : gts)
              if (g.label == other) covered += detail::intersection(d, g);
            if (covered / (d.offset - d.onset) >= *params.cttc) ++counts.ct[{c, other}];
          }
        }
      }
    }
  }
  return counts;
}

// Per-class TPR and effective FPR (per hour) for one operating point.
inline std::map<std::string, ClassRates> rates(const OperatingPointCounts& counts, const GroundTruth& gt,
                                               const PsdsParams& params,
                                               const std::vector<std::string>& classes) {
  const double total_seconds = gt.dataset_duration();
  if (!(total_seconds > 0.0)) throw DataError("rates: dataset duration must be positive");

  std::map<std::string, std::int64_t> n_gt;
  std::map<std::string, double> class_dur;
  for (const auto& c : classes) {
    n_gt[c] = 0;
    class_dur[c] = gt.class_duration(c);
  }
  for (const auto& [clip, list] : gt.events)
    for (const auto& ev : list) ++n_gt[ev.label];

  std::map<std::string, ClassRates> out;
  for (const auto& c : classes) {
    ClassRates r;
    const auto tp = counts.tp.count(c) ? counts.tp.at(c) : 0;
    const auto fp = counts.fp.count(c) ? counts.fp.at(c) : 0;
    r.tpr = static_cast<double>(tp) / static_cast<double>(std::max<std::int64_t>(1, n_gt[c]));
    const double fpr = static_cast<double>(fp) / total_seconds * 3600.0;
    double ct_term = 0.0;
    if (params.alpha_ct > 0.0 && classes.size() > 1) {
      double ctr_sum = 0.0;
      for (const auto& other : classes) {
        if (other == c) continue;
        const auto it = counts.ct.find({c, other});
        const std::int64_t n = it != counts.ct.end() ? it->second : 0;
        if (n == 0) continue;
        if (!(class_dur[other] > 0.0))
          throw DataError("rates: cross-triggers against class " + other + " with zero ground-truth duration");
        ctr_sum += static_cast<double>(n) / class_dur[other] * 3600.0;
      }
      ct_term = params.alpha_ct * ctr_sum / static_cast<double>(classes.size() - 1);
    }
    r.efpr = fpr + ct_term;
    out[c] = r;
  }
  return out;
}

// PSD-ROC over all operating points. Per class the support curve is
// S_c(e) = max{ tpr : efpr_c <= e } (0 with no qualifying point); the
// effective TPR is mu(e) = max(0, mean_c S_c - alpha_st * popstd_c S_c) and
// PSDS = (1/e_max) * integral of mu over [0, e_max], summed exactly over
// the step segments.
inline PsdsReport psd_roc(const std::vector<std::map<std::string, ClassRates>>& op_rates,
                          const PsdsParams& params, const std::vector<std::string>& classes) {
  params.validate();
  if (op_rates.empty()) throw InvalidInput("psd_roc: need at least one operating point");

  PsdsReport report;
  report.params = params;

  // Per class: operating points sorted by efpr with prefix-max tpr.
  std::map<std::string, std::vector<PsdsReport::RocPoint>> support;
  for (const auto& c : classes) {
    std::vector<PsdsReport::RocPoint> pts;
    for (const auto& op : op_rates) {
      const auto it = op.find(c);
      if (it != op.end()) pts.push_back({it->second.efpr, it->second.tpr});
    }
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
      return a.efpr < b.efpr || (a.efpr == b.efpr && a.tpr < b.tpr);
    });
    double best = 0.0;
    std::vector<PsdsReport::RocPoint> filtered;
    for (const auto& p : pts) {
      if (p.tpr > best) {
        best = p.tpr;
        // Collapse equal-efpr points to the best one.
        if (!filtered.empty() && filtered.back().efpr == p.efpr)
          filtered.back().tpr = best;
        else
          filtered.push_back({p.efpr, best});
      }
    }
    support[c] = std::move(filtered);
    report.curves[c] = support[c];
  }

  // Breakpoints of mu within [0, e_max].
  std::set<double> breaks;
  breaks.insert(0.0);
  for (const auto& [c, pts] : support)
    for (const auto& p : pts)
      if (p.efpr <= params.e_max) breaks.insert(p.efpr);

  std::vector<double> edges(breaks.begin(), breaks.end());
  edges.push_back(params.e_max);

  double area = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double e = edges[i];
    const double width = edges[i + 1] - e;
    if (width <= 0.0) continue;
    double mean = 0.0;
    std::vector<double> vals;
    vals.reserve(classes.size());
    for (const auto& c : classes) {
      const auto& pts = support[c];
      double s = 0.0;
      for (const auto& p : pts) {
        if (p.efpr <= e)
          s = p.tpr;  // prefix max, points sorted by efpr
        else
          break;
      }
      vals.push_back(s);
      mean += s;
    }
    mean /= static_cast<double>(classes.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(classes.size());
    const double mu = std::max(0.0, mean - params.alpha_st * std::sqrt(var));
    area += mu * width;
  }
  report.psds = area / params.e_max;
  return report;
}

// Full evaluation: match each threshold's detections, convert to rates,
// and build the PSD-ROC.
inline PsdsReport evaluate(const std::map<double, ClipEvents>& per_threshold, const GroundTruth& gt,
                           const PsdsParams& params) {
  if (per_threshold.empty()) throw InvalidInput("evaluate: need at least one threshold");
  const auto classes = gt.classes();
  if (classes.empty()) throw DataError("evaluate: ground truth has no events");

  std::vector<OperatingPointCounts> all_counts;
  std::vector<std::map<std::string, ClassRates>> all_rates;
  for (const auto& [tau, dets] : per_threshold) {
    auto counts = match_operating_point(dets, gt, params, classes);
    counts.threshold = tau;
    all_rates.push_back(rates(counts, gt, params, classes));
    all_counts.push_back(std::move(counts));
  }
  PsdsReport report = psd_roc(all_rates, params, classes);
  report.op_counts = std::move(all_counts);
  report.op_rates = std::move(all_rates);
  return report;
}

// Machine-readable report table plus the final score.
inline void write_report(const std::string& path, const PsdsReport& report,
                         const std::vector<std::string>& classes) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << "# dtc=" << report.params.dtc << " gtc=" << report.params.gtc << " cttc="
     << (report.params.cttc ? std::to_string(*report.params.cttc) : std::string("none"))
     << " alpha_st=" << report.params.alpha_st << " alpha_ct=" << report.params.alpha_ct
     << " e_max=" << report.params.e_max << "\n";
  os << "threshold\tclass\ttp\tfp\tct\ttpr\tefpr\n";
  os << std::setprecision(9);
  for (std::size_t i = 0; i < report.op_counts.size(); ++i) {
    const auto& counts = report.op_counts[i];
    const auto& rate_map = report.op_rates[i];
    for (const auto& c : classes) {
      std::string ct_cell;
      for (const auto& other : classes) {
        if (other == c) continue;
        const auto it = counts.ct.find({c, other});
        if (it != counts.ct.end() && it->second > 0) {
          if (!ct_cell.empty()) ct_cell += ",";
          ct_cell += other + "=" + std::to_string(it->second);
        }
      }
      const auto& r = rate_map.at(c);
      os << counts.threshold << '\t' << c << '\t' << counts.tp.at(c) << '\t' << counts.fp.at(c) << '\t'
         << (ct_cell.empty() ? "-" : ct_cell) << '\t' << r.tpr << '\t' << r.efpr << '\n';
    }
  }
  os << "PSDS\t" << std::fixed << std::setprecision(6) << report.psds << "\n";
  if (!os) throw IoError("failed writing " + path);
}

}  // namespace sedkit
