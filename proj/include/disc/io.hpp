#pragma once

#include "disc/conceptbank.hpp"
#include "disc/discovery.hpp"
#include "disc/envcluster.hpp"
#include "disc/model.hpp"
#include "disc/synthdata.hpp"
#include "disc/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace disc {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

/// Doubles are written with 17 significant digits so reads round-trip exactly.
std::string format_double(double value);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);
Json read_json(const fs::path& path);
void write_json(const fs::path& path, const Json& value);

/// Header feat_0..feat_{p-1},label,env_id.
void write_dataset_csv(const fs::path& path, const LabeledDataset& data);
LabeledDataset read_dataset_csv(const fs::path& path);

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

Json patterns_to_json(const GammaPatterns& patterns);
GammaPatterns patterns_from_json(const Json& j);

/// Checkpoint: shapes plus flat row-major weight arrays.
Json model_to_json(const Classifier& model);
Classifier model_from_json(const Json& j);

Json bank_manifest(const ConceptBank& bank);

/// Rows labelled by concept id: concept_id,v_0..v_{d-1}.
void write_cavset_csv(const fs::path& path, const CavSet& cavs);

/// index,class,cluster
void write_clusters_csv(const fs::path& path, const PerClassClusters& clusters);

Json sensitivity_report_to_json(const SensitivityReport& report);

/// epoch,loss,avg_acc,worst_acc,mean_spurious_sensitivity
std::string metrics_csv(const TrainReport& report);
/// epoch,concept_id,sensitivity
std::string sensitivity_csv(const TrainReport& report, const ConceptBank& bank);

}  // namespace disc
