#include "disc/io.hpp"

#include "disc/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace disc {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const Json& value) { write_text(path, value.dump(2) + "\n"); }

void write_dataset_csv(const fs::path& path, const LabeledDataset& data) {
  data.check_consistent();
  std::string out;
  for (Index c = 0; c < data.dim(); ++c) out += "feat_" + std::to_string(c) + ",";
  out += "label,env_id\n";
  for (Index r = 0; r < data.size(); ++r) {
    for (Index c = 0; c < data.dim(); ++c) {
      out += format_double(data.features(r, c));
      out += ',';
    }
    out += std::to_string(data.labels(r)) + "," + std::to_string(data.env_ids(r)) + "\n";
  }
  write_text(path, out);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

}  // namespace

LabeledDataset read_dataset_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty file");
  const auto header = split_line(line);
  if (header.size() < 2 || header[header.size() - 2] != "label" || header.back() != "env_id") {
    throw ConfigError(path.string() + ": header must end with label,env_id");
  }
  const std::size_t dim = header.size() - 2;
  for (std::size_t c = 0; c < dim; ++c) {
    if (header[c] != "feat_" + std::to_string(c)) throw ConfigError(path.string() + ": unexpected column " + header[c]);
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(split_line(line));
    if (rows.back().size() != header.size()) {
      throw ConfigError(path.string() + ": row " + std::to_string(rows.size()) + " has the wrong number of cells");
    }
  }
  LabeledDataset data;
  data.features.resize(static_cast<Index>(rows.size()), static_cast<Index>(dim));
  data.labels.resize(static_cast<Index>(rows.size()));
  data.env_ids.resize(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<Index>(r);
    try {
      for (std::size_t c = 0; c < dim; ++c) data.features(i, static_cast<Index>(c)) = std::stod(rows[r][c]);
      data.labels(i) = std::stoi(rows[r][dim]);
      data.env_ids(i) = std::stoi(rows[r][dim + 1]);
    } catch (const std::logic_error&) {
      throw ConfigError(path.string() + ": unparsable value in row " + std::to_string(r + 1));
    }
    if (data.labels(i) != 1 && data.labels(i) != -1) throw ConfigError(path.string() + ": labels must be +-1");
  }
  return data;
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array()) throw ConfigError("expected a matrix (array of rows)");
  const auto rows = static_cast<Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Index>(j[0].size()) : Index{0};
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) throw ConfigError("matrix rows differ in length");
    for (Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Json vector_to_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw ConfigError("expected an array of numbers");
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

Json patterns_to_json(const GammaPatterns& patterns) {
  return Json{{"p2", patterns.p2()},
              {"k", patterns.k()},
              {"gamma_minus", matrix_to_json(patterns.gamma[0])},
              {"gamma_plus", matrix_to_json(patterns.gamma[1])}};
}

GammaPatterns patterns_from_json(const Json& j) {
  GammaPatterns p;
  p.gamma[0] = matrix_from_json(j.at("gamma_minus"));
  p.gamma[1] = matrix_from_json(j.at("gamma_plus"));
  const int k = j.at("k").get<int>();
  const int p2 = j.at("p2").get<int>();
  for (auto& g : p.gamma) {
    if (g.size() == 0) g.resize(k, p2);
  }
  if (p.k() != k || p.p2() != p2) throw ConfigError("pattern shapes disagree with p2/k");
  return p;
}

namespace {

Json flat_block(const Matrix& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  }
  return Json{{"shape", {m.rows(), m.cols()}}, {"data", flat}};
}

Matrix block_from_json(const Json& j) {
  const auto shape = j.at("shape").get<std::vector<Index>>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (shape.size() != 2 || static_cast<Index>(data.size()) != shape[0] * shape[1]) {
    throw ConfigError("checkpoint block shape does not match its data");
  }
  Matrix m(shape[0], shape[1]);
  for (Index r = 0; r < shape[0]; ++r) {
    for (Index c = 0; c < shape[1]; ++c) m(r, c) = data[static_cast<std::size_t>(r * shape[1] + c)];
  }
  return m;
}

}  // namespace

Json model_to_json(const Classifier& model) {
  Json j{{"input_dim", model.input_dim()},
         {"encoder", model.encoder.trainable() ? "tanh_mlp" : "identity"},
         {"loss", to_string(model.loss)},
         {"use_bias", model.use_bias},
         {"head", flat_block(model.head)},
         {"bias", flat_block(model.bias)}};
  if (model.encoder.mlp) {
    j["encoder_weights"] = flat_block(model.encoder.mlp->weights);
    j["encoder_bias"] = flat_block(model.encoder.mlp->bias);
  }
  return j;
}

Classifier model_from_json(const Json& j) {
  Classifier model;
  model.encoder.input_dim = j.at("input_dim").get<int>();
  const auto kind = j.at("encoder").get<std::string>();
  if (kind == "tanh_mlp") {
    model.encoder.mlp = MlpLayer{block_from_json(j.at("encoder_weights")), block_from_json(j.at("encoder_bias")).col(0)};
  } else if (kind != "identity") {
    throw ConfigError("unknown encoder '" + kind + "'");
  }
  model.loss = loss_kind_from_string(j.at("loss").get<std::string>());
  model.use_bias = j.at("use_bias").get<bool>();
  model.head = block_from_json(j.at("head"));
  model.bias = block_from_json(j.at("bias")).col(0);
  model.check_consistent();
  return model;
}

Json bank_manifest(const ConceptBank& bank) {
  Json concepts = Json::array();
  for (const Concept& c : bank.concepts) {
    concepts.push_back({{"id", c.id}, {"name", c.name}, {"category", c.category}, {"coordinate", c.coordinate}});
  }
  return Json{{"input_dim", bank.input_dim},
              {"image_noise", bank.image_noise},
              {"n_pos", bank.n_pos},
              {"n_neg", bank.n_neg},
              {"concepts", concepts}};
}

void write_cavset_csv(const fs::path& path, const CavSet& cavs) {
  std::string out = "concept_id";
  for (Index c = 0; c < cavs.vectors.cols(); ++c) out += ",v_" + std::to_string(c);
  out += '\n';
  for (Index r = 0; r < cavs.size(); ++r) {
    out += std::to_string(cavs.concept_ids[static_cast<std::size_t>(r)]);
    for (Index c = 0; c < cavs.vectors.cols(); ++c) out += "," + format_double(cavs.vectors(r, c));
    out += '\n';
  }
  write_text(path, out);
}

void write_clusters_csv(const fs::path& path, const PerClassClusters& clusters) {
  std::vector<std::pair<Index, std::string>> rows;
  for (int c = 0; c < kNumClasses; ++c) {
    for (std::size_t r = 0; r < clusters.members[c].size(); ++r) {
      rows.emplace_back(clusters.members[c][r], std::to_string(class_label(c)) + "," +
                                                    std::to_string(clusters.assignments[c](static_cast<Index>(r))));
    }
  }
  std::sort(rows.begin(), rows.end());
  std::string out = "index,class,cluster\n";
  for (const auto& [index, rest] : rows) out += std::to_string(index) + "," + rest + "\n";
  write_text(path, out);
}

Json sensitivity_report_to_json(const SensitivityReport& report) {
  Json dominant = Json::array();
  for (int y : report.dominant) dominant.push_back(class_label(y));
  Json probs = Json::object();
  for (std::size_t y = 0; y < report.probabilities.p.size(); ++y) {
    const std::string key = std::to_string(class_label(static_cast<int>(y)));
    probs[key] = report.probabilities.empty[y] ? Json(nullptr) : vector_to_json(report.probabilities.p[y]);
  }
  return Json{{"epoch", report.epoch},
              {"S", vector_to_json(report.sensitivity)},
              {"dominant", dominant},
              {"P", probs},
              {"cts", matrix_to_json(report.cts)}};
}

std::string metrics_csv(const TrainReport& report) {
  std::string out = "epoch,loss,avg_acc,worst_acc,mean_spurious_sensitivity\n";
  for (const EpochRecord& r : report.epochs) {
    out += std::to_string(r.epoch) + "," + format_double(r.loss) + ",";
    out += r.evaluation ? format_double(r.evaluation->avg_acc) + "," + format_double(r.evaluation->worst_acc) : "nan,nan";
    out += "," + format_double(r.mean_spurious_sensitivity) + "\n";
  }
  return out;
}

std::string sensitivity_csv(const TrainReport& report, const ConceptBank& bank) {
  std::string out = "epoch,concept_id,sensitivity\n";
  for (const EpochRecord& r : report.epochs) {
    if (!r.sensitivity) continue;
    for (Index i = 0; i < r.sensitivity->sensitivity.size(); ++i) {
      out += std::to_string(r.epoch) + "," + std::to_string(bank.concepts[static_cast<std::size_t>(i)].id) + "," +
             format_double(r.sensitivity->sensitivity(i)) + "\n";
    }
  }
  return out;
}

}  // namespace disc
