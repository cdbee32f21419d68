#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fast/entity.hpp"
#include "fast/error.hpp"
#include "fast/text.hpp"

namespace fast {

/// Normalized entity set per sentence.
inline std::vector<std::set<std::string>> sentence_entity_sets(const Document& doc,
                                                               const std::vector<EntityMention>& mentions) {
  std::vector<std::set<std::string>> sets(doc.sentences.size());
  for (const auto& m : mentions) {
    if (m.sentence_idx >= sets.size()) throw Error("document " + doc.id + ": mention outside sentence range");
    if (!m.normalized.empty()) sets[m.sentence_idx].insert(m.normalized);
  }
  return sets;
}

/// Distinct entities mentioned in some sentence i and again in (i, i + w].
inline std::size_t entity_consistency_count(const Document& doc, const std::vector<EntityMention>& mentions,
                                            std::size_t w) {
  if (w == 0) throw Error("window must be at least 1");
  const auto sets = sentence_entity_sets(doc, mentions);
  std::set<std::string> repeated;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t j = i + 1; j <= std::min(i + w, sets.size() - 1); ++j) {
      for (const auto& e : sets[i]) {
        if (sets[j].count(e)) repeated.insert(e);
      }
    }
  }
  return repeated.size();
}

/// Sentences sharing at least one entity with a sentence in (i, i + w].
inline std::size_t sentence_consistency_count(const Document& doc, const std::vector<EntityMention>& mentions,
                                              std::size_t w) {
  if (w == 0) throw Error("window must be at least 1");
  const auto sets = sentence_entity_sets(doc, mentions);
  std::size_t count = 0;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    bool shares = false;
    for (std::size_t j = i + 1; j <= std::min(i + w, sets.size() - 1) && !shares; ++j) {
      shares = std::any_of(sets[i].begin(), sets[i].end(), [&](const std::string& e) { return sets[j].count(e) > 0; });
    }
    if (shares) ++count;
  }
  return count;
}

struct DensityPoint {
  double x = 0.0;
  double density = 0.0;
};

using DensityCurve = std::vector<DensityPoint>;

inline constexpr std::size_t kDensitySamples = 256;

/// Silverman's rule 1.06 * sd * n^(-1/5); 0.1 when the sample has no spread.
inline double silverman_bandwidth(const std::vector<double>& values) {
  const double n = static_cast<double>(values.size());
  if (values.size() < 2) return 0.1;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd == 0.0) return 0.1;
  return 1.06 * sd * std::pow(n, -0.2);
}

inline double gaussian_kde_at(const std::vector<double>& values, double h, double x) {
  const double norm = 1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2.0 * M_PI));
  double s = 0.0;
  for (double v : values) {
    const double z = (x - v) / h;
    s += std::exp(-0.5 * z * z);
  }
  return s * norm;
}

/// Gaussian KDE sampled at 256 evenly spaced points over [min - 3h, max + 3h].
inline DensityCurve kernel_density(const std::vector<double>& values, std::optional<double> bandwidth = {}) {
  if (values.empty()) throw Error("kernel_density: no values");
  const double h = bandwidth.value_or(silverman_bandwidth(values));
  if (!(h > 0.0)) throw Error("kernel_density: bandwidth must be positive");
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const double lo = *mn - 3.0 * h;
  const double hi = *mx + 3.0 * h;
  DensityCurve curve(kDensitySamples);
  for (std::size_t i = 0; i < kDensitySamples; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(kDensitySamples - 1);
    curve[i] = {x, gaussian_kde_at(values, h, x)};
  }
  return curve;
}

inline double trapezoid_integral(const DensityCurve& c) {
  double s = 0.0;
  for (std::size_t i = 1; i < c.size(); ++i) s += 0.5 * (c[i].density + c[i - 1].density) * (c[i].x - c[i - 1].x);
  return s;
}

inline double curve_mode(const DensityCurve& c) {
  return std::max_element(c.begin(), c.end(), [](const DensityPoint& a, const DensityPoint& b) {
           return a.density < b.density;
         })->x;
}

struct DocumentConsistency {
  std::string doc_id;
  Label label = Label::Human;
  std::size_t ecc = 0;
  std::size_t scc = 0;
};

/// Consistency statistics of two corpora at one window size. The kde_* curves
/// describe the ECC distribution, the scc_kde_* curves the SCC distribution.
struct ConsistencyReport {
  std::size_t window = 1;
  std::vector<DocumentConsistency> per_document;
  DensityCurve kde_human;
  DensityCurve kde_machine;
  DensityCurve scc_kde_human;
  DensityCurve scc_kde_machine;

  double mean(Label label, bool ecc) const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& d : per_document) {
      if (d.label != label) continue;
      s += static_cast<double>(ecc ? d.ecc : d.scc);
      ++n;
    }
    return n == 0 ? 0.0 : s / static_cast<double>(n);
  }
};

inline std::vector<ConsistencyReport> profile_corpus(const std::vector<Document>& human,
                                                     const std::vector<Document>& machine,
                                                     const std::vector<std::size_t>& windows) {
  if (human.empty() || machine.empty()) throw Error("profile: both corpora must be non-empty");
  auto mention_lists = [](const std::vector<Document>& docs) {
    std::vector<std::vector<EntityMention>> out;
    out.reserve(docs.size());
    for (const auto& d : docs) out.push_back(extract_entities(d));
    return out;
  };
  const auto hm = mention_lists(human);
  const auto mm = mention_lists(machine);

  std::vector<ConsistencyReport> reports;
  for (std::size_t w : windows) {
    ConsistencyReport r;
    r.window = w;
    std::vector<double> ecc[2];
    std::vector<double> scc[2];
    auto add = [&](const std::vector<Document>& docs, const std::vector<std::vector<EntityMention>>& ms, Label label) {
      for (std::size_t i = 0; i < docs.size(); ++i) {
        DocumentConsistency d{docs[i].id, label, entity_consistency_count(docs[i], ms[i], w),
                              sentence_consistency_count(docs[i], ms[i], w)};
        ecc[static_cast<int>(label)].push_back(static_cast<double>(d.ecc));
        scc[static_cast<int>(label)].push_back(static_cast<double>(d.scc));
        r.per_document.push_back(std::move(d));
      }
    };
    add(human, hm, Label::Human);
    add(machine, mm, Label::Machine);
    r.kde_human = kernel_density(ecc[0]);
    r.kde_machine = kernel_density(ecc[1]);
    r.scc_kde_human = kernel_density(scc[0]);
    r.scc_kde_machine = kernel_density(scc[1]);
    reports.push_back(std::move(r));
  }
  return reports;
}

/// `doc_id,label,w,ecc,scc`
inline void write_consistency_csv(const std::vector<ConsistencyReport>& reports, std::ostream& out) {
  out << "doc_id,label,w,ecc,scc\n";
  for (const auto& r : reports) {
    for (const auto& d : r.per_document) {
      out << d.doc_id << ',' << to_string(d.label) << ',' << r.window << ',' << d.ecc << ',' << d.scc << '\n';
    }
  }
}

/// `label,w,x,density`
inline void write_kde_csv(const std::vector<ConsistencyReport>& reports, std::ostream& out, bool scc = false) {
  out << "label,w,x,density\n";
  out << std::setprecision(10);
  for (const auto& r : reports) {
    for (Label label : {Label::Human, Label::Machine}) {
      const DensityCurve& c = scc ? (label == Label::Human ? r.scc_kde_human : r.scc_kde_machine)
                                  : (label == Label::Human ? r.kde_human : r.kde_machine);
      for (const auto& p : c) out << to_string(label) << ',' << r.window << ',' << p.x << ',' << p.density << '\n';
    }
  }
}

/// Minimal two-curve line plot.
inline std::string kde_svg(const ConsistencyReport& r, bool scc = false) {
  const DensityCurve& h = scc ? r.scc_kde_human : r.kde_human;
  const DensityCurve& m = scc ? r.scc_kde_machine : r.kde_machine;
  double x0 = std::min(h.front().x, m.front().x);
  double x1 = std::max(h.back().x, m.back().x);
  double y1 = 0.0;
  for (const auto* c : {&h, &m}) {
    for (const auto& p : *c) y1 = std::max(y1, p.density);
  }
  const double width = 640, height = 400, pad = 40;
  auto path = [&](const DensityCurve& c) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2);
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double px = pad + (c[i].x - x0) / (x1 - x0) * (width - 2 * pad);
      const double py = height - pad - c[i].density / y1 * (height - 2 * pad);
      s << (i == 0 ? "M" : " L") << px << ',' << py;
    }
    return s.str();
  };
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n"
      << "<text x=\"" << pad << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << (scc ? "SCC" : "ECC")
      << " density, w=" << r.window << " (blue: human, red: machine)</text>\n"
      << "<path d=\"" << path(h) << "\" fill=\"none\" stroke=\"blue\"/>\n"
      << "<path d=\"" << path(m) << "\" fill=\"none\" stroke=\"red\"/>\n"
      << "</svg>\n";
  return svg.str();
}

}  // namespace fast
