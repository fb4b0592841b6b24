#pragma once

#include "disc/model.hpp"
#include "disc/rng.hpp"
#include "disc/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace disc {

struct Concept {
  int id = 0;
  std::string name;
  std::string category;
  int coordinate = 0;  // input coordinate whose basis vector is the concept image
};

struct SvmHyper {
  double lambda = 1e-2;
  int epochs = 200;
  bool averaging = true;
};

/// Synthetic concept bank: concept i is the input-space basis vector of its
/// coordinate plus optional isotropic noise.
struct ConceptBank {
  std::vector<Concept> concepts;
  int input_dim = 0;
  double image_noise = 0.0;
  int n_pos = 150;
  int n_neg = 150;
  SvmHyper svm;

  /// One concept per input coordinate; the first p1 are categorised
  /// "invariant-candidate", the rest "spurious-candidate".
  static ConceptBank synthetic(int p1, int p2);

  /// Keeps only the listed concept ids, preserving bank order.
  ConceptBank restricted(const std::vector<int>& allowlist) const;

  Index size() const { return static_cast<Index>(concepts.size()); }
  Index position(int concept_id) const;  // throws ConfigError for unknown ids
  IndexSet positions_in_category(const std::string& category) const;
  void validate() const;
};

Vector synth_concept_image(const ConceptBank& bank, int concept_id, Rng& rng);

/// Stacked images for a list of bank positions.
Matrix concept_images(const ConceptBank& bank, const IndexSet& positions, Rng& rng);

struct CavFit {
  Vector direction;  // unit norm, oriented toward the positives
  double bias = 0.0;
  double margin = 0.0;  // min over points of signed distance, in the fitted coordinates
  std::vector<double> objective_trace;  // per epoch: best objective among averaged iterates so far
};

/// Soft-margin linear SVM by Pegasos subgradient descent on already-encoded
/// points. Points are centred on the midpoint of the class means and scaled to
/// unit RMS norm first, so the returned direction does not depend on a global
/// rescaling of the inputs. Throws NumericalError("inseparable concept") when
/// the two point sets coincide.
CavFit fit_linear_svm(const Matrix& positives, const Matrix& negatives, const SvmHyper& hyper, Rng& rng);

Vector learn_cav(const Encoder& encoder, const Matrix& positives, const Matrix& negatives, const SvmHyper& hyper,
                 Rng& rng);

struct CavSet {
  std::vector<int> concept_ids;
  Matrix vectors;  // m x d, unit rows
  Vector fit_margins;

  Index size() const { return vectors.rows(); }
  void check_unit_rows(double tol = 1e-9) const;
};

/// Fits one CAV per concept; concept i uses the substream rng.split(i), so the
/// result does not depend on fitting order.
CavSet query_cavs(const ConceptBank& bank, const Encoder& encoder, const Rng& rng, const SvmHyper& hyper = {});

}  // namespace disc
