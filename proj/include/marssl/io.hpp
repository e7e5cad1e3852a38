#pragma once

// File formats: JSON for fitted models, CSV for datasets, predictions,
// ground truth and reliability diagrams. Numbers are written in the shortest
// decimal form that round-trips to the same double.

#include "marssl/datagen.hpp"
#include "marssl/dimred.hpp"
#include "marssl/eval.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>

namespace marssl {

using json = nlohmann::json;

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw Error(ErrorCode::ParseError, "not a number: '" + std::string(s) + "'");
  return v;
}

// ---- JSON ---------------------------------------------------------------

inline json to_json_vector(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline json to_json_row_major(const Matrix& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  return flat;
}

inline Vector vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Matrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols) {
  const auto v = j.get<std::vector<double>>();
  require(static_cast<Eigen::Index>(v.size()) == rows * cols, ErrorCode::ParseError, "matrix has wrong element count");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = v[static_cast<std::size_t>(i * cols + j)];
  return m;
}

inline json scalar_to_json(double v) { return std::isfinite(v) ? json(v) : json(format_double(v)); }
inline double scalar_from_json(const json& j) { return j.is_string() ? parse_double(j.get<std::string>()) : j.get<double>(); }

inline json to_json(const GmmDensity& g) {
  json comps = json::array();
  for (const auto& c : g.components())
    comps.push_back({{"weight", c.weight}, {"mean", to_json_vector(c.mean)}, {"covariance", to_json_row_major(c.covariance)}});
  return {{"dim", g.dim()}, {"components", comps}};
}

inline GmmDensity gmm_from_json(const json& j) {
  const auto d = j.at("dim").get<Eigen::Index>();
  std::vector<GaussianComponent> comps;
  for (const auto& c : j.at("components"))
    comps.push_back({c.at("weight").get<double>(), vector_from_json(c.at("mean")), matrix_from_json(c.at("covariance"), d, d)});
  return GmmDensity(std::move(comps));
}

inline json to_json(const PcaMap& p) {
  return {{"input_dim", p.input_dim()},
          {"output_dim", p.output_dim()},
          {"mean", to_json_vector(p.mean)},
          {"basis", to_json_row_major(p.basis)},
          {"explained_variance", to_json_vector(p.explained_variance)}};
}

inline PcaMap pca_from_json(const json& j) {
  PcaMap p;
  p.mean = vector_from_json(j.at("mean"));
  p.explained_variance = vector_from_json(j.at("explained_variance"));
  p.basis = matrix_from_json(j.at("basis"), p.mean.size(), p.explained_variance.size());
  return p;
}

inline json to_json(const MarModel& m) {
  json classes = json::array();
  for (std::size_t y = 0; y < m.label_set().size(); ++y)
    classes.push_back({{"label", m.label_set()[y]}, {"density", to_json(m.class_densities()[y])}});
  return {{"method", to_string(m.method())},
          {"w", m.w()},
          {"kappa", scalar_to_json(m.kappa())},
          {"label_set", m.label_set()},
          {"class_prior", m.class_prior()},
          {"counts",
           {{"augmented", m.augmented_count()}, {"residual", m.residual_count()}, {"per_class", m.class_counts()}}},
          {"class_densities", classes},
          {"unlabeled_density", to_json(m.unlabeled_density())}};
}

inline MarModel mar_model_from_json(const json& j) {
  std::vector<Label> labels;
  std::vector<GmmDensity> densities;
  for (const auto& c : j.at("class_densities")) {
    labels.push_back(c.at("label").get<Label>());
    densities.push_back(gmm_from_json(c.at("density")));
  }
  require(labels == j.at("label_set").get<std::vector<Label>>(), ErrorCode::ParseError,
          "class_densities order differs from label_set");
  const auto& counts = j.at("counts");
  MarModel model(RegionTest(labels, std::move(densities), gmm_from_json(j.at("unlabeled_density")),
                            scalar_from_json(j.at("kappa"))),
                 j.at("class_prior").get<std::vector<double>>(), counts.at("augmented").get<std::size_t>(),
                 counts.at("residual").get<std::size_t>(), parse_method(j.at("method").get<std::string>()),
                 counts.at("per_class").get<std::vector<std::size_t>>());
  require(model.w() == j.at("w").get<double>(), ErrorCode::ParseError, "stored w disagrees with counts");
  return model;
}

inline json to_json(const ReliabilityDiagram& d) {
  json bins = json::array();
  for (const auto& b : d.bins)
    bins.push_back({{"lo", b.lo},
                    {"hi", b.hi},
                    {"count", b.count},
                    {"mean_nominal", b.mean_nominal},
                    {"empirical_error", b.empirical_error ? json(*b.empirical_error) : json(nullptr)}});
  return {{"bins", bins}, {"ece", d.ece}, {"overall_accuracy", d.overall_accuracy}};
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::ParseError, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::ParseError, "cannot write " + path);
  out << text;
}

// ---- CSV ----------------------------------------------------------------

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

/// Dataset file: header f0..f{d-1}, optional trailing `label` column whose
/// empty cells mark unlabeled rows.
struct Dataset {
  FeatureMatrix features;
  std::vector<std::optional<Label>> labels;
  bool has_label_column = false;

  Eigen::Index size() const { return features.rows(); }
};

inline std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

inline Dataset parse_dataset_csv(std::istream& in, const std::string& name = "<csv>") {
  const auto lines = read_lines(in);
  require(!lines.empty(), ErrorCode::ParseError, name + ": missing header row");
  const auto header = split_csv_line(lines[0]);
  Dataset ds;
  ds.has_label_column = !header.empty() && header.back() == "label";
  const std::size_t d = header.size() - (ds.has_label_column ? 1 : 0);
  for (std::size_t j = 0; j < d; ++j)
    require(header[j] == "f" + std::to_string(j), ErrorCode::ParseError,
            name + ": header column " + std::to_string(j) + " should be f" + std::to_string(j));
  ds.features.resize(static_cast<Eigen::Index>(lines.size() - 1), static_cast<Eigen::Index>(d));
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_csv_line(lines[r]);
    const std::string where = name + ": row " + std::to_string(r);
    require(cells.size() == header.size(), ErrorCode::ParseError,
            where + " has " + std::to_string(cells.size()) + " cells, expected " + std::to_string(header.size()));
    for (std::size_t j = 0; j < d; ++j) {
      double v = 0.0;
      try {
        v = parse_double(cells[j]);
      } catch (const Error&) {
        throw Error(ErrorCode::ParseError, where + " column f" + std::to_string(j) + ": not a number");
      }
      require(std::isfinite(v), ErrorCode::ParseError, where + " column f" + std::to_string(j) + ": non-finite value");
      ds.features(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(j)) = v;
    }
    if (ds.has_label_column && !cells.back().empty()) {
      Label y = 0;
      const auto cell = cells.back();
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), y);
      require(res.ec == std::errc() && res.ptr == cell.data() + cell.size(), ErrorCode::ParseError,
              where + ": label is not an integer");
      ds.labels.emplace_back(y);
    } else {
      ds.labels.emplace_back(std::nullopt);
    }
  }
  return ds;
}

inline Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::ParseError, "cannot open " + path);
  return parse_dataset_csv(in, path);
}

inline std::string dataset_csv(const FeatureMatrix& x, const std::vector<std::optional<Label>>* labels) {
  std::ostringstream out;
  for (Eigen::Index j = 0; j < x.cols(); ++j) out << (j ? "," : "") << 'f' << j;
  if (labels) out << (x.cols() ? "," : "") << "label";
  out << '\n';
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) out << (j ? "," : "") << format_double(x(i, j));
    if (labels) {
      out << ',';
      if (const auto& y = (*labels)[static_cast<std::size_t>(i)]) out << *y;
    }
    out << '\n';
  }
  return out.str();
}

inline std::string labeled_csv(const LabeledSet& s) {
  std::vector<std::optional<Label>> y(s.labels.begin(), s.labels.end());
  return dataset_csv(s.features, &y);
}

inline std::string unlabeled_csv(const UnlabeledSet& s) {
  std::vector<std::optional<Label>> y(static_cast<std::size_t>(s.size()));
  return dataset_csv(s.features, &y);
}

/// Ground truth sidecar: index,label[,rare].
struct GroundTruth {
  std::vector<Label> labels;
  std::optional<std::vector<bool>> rare;
};

inline std::string truth_csv(const std::vector<Label>& labels, const std::vector<bool>* rare) {
  std::ostringstream out;
  out << "index,label" << (rare ? ",rare" : "") << '\n';
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << i << ',' << labels[i];
    if (rare) out << ',' << ((*rare)[i] ? 1 : 0);
    out << '\n';
  }
  return out.str();
}

inline GroundTruth parse_truth_csv(std::istream& in, const std::string& name = "<truth>") {
  const auto lines = read_lines(in);
  require(!lines.empty(), ErrorCode::ParseError, name + ": missing header row");
  const auto header = split_csv_line(lines[0]);
  require(header.size() >= 2 && header[0] == "index" && header[1] == "label", ErrorCode::ParseError,
          name + ": header must start with index,label");
  const bool has_rare = header.size() >= 3 && header[2] == "rare";
  GroundTruth gt;
  if (has_rare) gt.rare.emplace();
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_csv_line(lines[r]);
    const std::string where = name + ": row " + std::to_string(r);
    require(cells.size() == header.size(), ErrorCode::ParseError, where + " has the wrong number of cells");
    Label y = 0;
    const auto res = std::from_chars(cells[1].data(), cells[1].data() + cells[1].size(), y);
    require(res.ec == std::errc() && res.ptr == cells[1].data() + cells[1].size(), ErrorCode::ParseError,
            where + ": label is not an integer");
    gt.labels.push_back(y);
    if (has_rare) {
      require(cells[2] == "0" || cells[2] == "1", ErrorCode::ParseError, where + ": rare must be 0 or 1");
      gt.rare->push_back(cells[2] == "1");
    }
  }
  return gt;
}

/// index,label,error_prob,in_region,p_<label>...
inline std::string predictions_csv(const std::vector<Label>& label_set, std::span<const Prediction> preds) {
  std::ostringstream out;
  out << "index,label,error_prob,in_region";
  for (Label y : label_set) out << ",p_" << y;
  out << '\n';
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i];
    out << i << ',' << p.label << ',' << format_double(p.error_prob) << ',' << (p.in_region ? 1 : 0);
    for (double v : p.posterior) out << ',' << format_double(v);
    out << '\n';
  }
  return out.str();
}

inline std::vector<Prediction> parse_predictions_csv(std::istream& in, const std::string& name = "<predictions>") {
  const auto lines = read_lines(in);
  require(!lines.empty(), ErrorCode::ParseError, name + ": missing header row");
  const auto header = split_csv_line(lines[0]);
  require(header.size() >= 4 && header[0] == "index" && header[1] == "label" && header[2] == "error_prob" &&
              header[3] == "in_region",
          ErrorCode::ParseError, name + ": unexpected header");
  std::vector<Prediction> preds;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_csv_line(lines[r]);
    const std::string where = name + ": row " + std::to_string(r);
    require(cells.size() == header.size(), ErrorCode::ParseError, where + " has the wrong number of cells");
    Prediction p;
    try {
      p.label = static_cast<Label>(parse_double(cells[1]));
      p.error_prob = parse_double(cells[2]);
      p.in_region = cells[3] == "1";
      for (std::size_t j = 4; j < cells.size(); ++j) p.posterior.push_back(parse_double(cells[j]));
    } catch (const Error&) {
      throw Error(ErrorCode::ParseError, where + ": malformed number");
    }
    preds.push_back(std::move(p));
  }
  return preds;
}

/// bin_lo,bin_hi,count,mean_nominal,empirical_error (empty when the bin is empty).
inline std::string diagram_csv(const ReliabilityDiagram& d) {
  std::ostringstream out;
  out << "bin_lo,bin_hi,count,mean_nominal,empirical_error\n";
  for (const auto& b : d.bins) {
    out << format_double(b.lo) << ',' << format_double(b.hi) << ',' << b.count << ',' << format_double(b.mean_nominal)
        << ',';
    if (b.empirical_error) out << format_double(*b.empirical_error);
    out << '\n';
  }
  return out.str();
}

}  // namespace marssl
