#pragma once

// PolSAR pipeline: scattering vectors to the Pauli basis, boxcar coherency
// matrices, network channel encodings, a seeded synthetic scene generator and
// the `.pscene` file format.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cvnn/ctensor.hpp"
#include "json.hpp"

namespace cvnn::polsar {

inline constexpr std::uint8_t kUnlabeled = 255;

/// Monostatic scattering vector (S_HH, sqrt(2) S_HV, S_VV).
struct ScatteringVector {
  cplx hh;
  cplx hv_scaled;
  cplx vv;
};

using PauliVector = std::array<cplx, 3>;

/// 3x3 complex matrix, row-major.
using Matrix3 = std::array<cplx, 9>;

struct CoherencyMatrix {
  Matrix3 t{};
  std::size_t n = 0;  // pixels averaged

  cplx operator()(std::size_t i, std::size_t j) const { return t[3 * i + j]; }
};

PauliVector scattering_to_pauli(const ScatteringVector& s);
double norm(const ScatteringVector& s);
double norm(const PauliVector& k);

/// (1/n) sum k k^H over the given vectors; Hermitian by construction.
CoherencyMatrix coherency_matrix(std::span<const PauliVector> ks);

/// H x W scene of Pauli vectors with an aligned label grid.
class PolsarField {
 public:
  PolsarField() = default;
  PolsarField(std::size_t height, std::size_t width, std::vector<std::string> class_names);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t classes() const noexcept { return class_names_.size(); }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }

  PauliVector& pauli(std::size_t r, std::size_t c) { return pixels_[r * width_ + c]; }
  const PauliVector& pauli(std::size_t r, std::size_t c) const { return pixels_[r * width_ + c]; }
  std::uint8_t& label(std::size_t r, std::size_t c) { return labels_[r * width_ + c]; }
  std::uint8_t label(std::size_t r, std::size_t c) const { return labels_[r * width_ + c]; }

  std::vector<PauliVector>& pixels() noexcept { return pixels_; }
  const std::vector<PauliVector>& pixels() const noexcept { return pixels_; }
  std::vector<std::uint8_t>& labels() noexcept { return labels_; }
  const std::vector<std::uint8_t>& labels() const noexcept { return labels_; }

  /// Columns [begin, end) as a new field.
  PolsarField columns(std::size_t begin, std::size_t end) const;
  /// Labeled pixel count per class.
  std::vector<std::size_t> class_counts() const;

  bool operator==(const PolsarField&) const = default;

 private:
  std::size_t height_ = 0, width_ = 0;
  std::vector<std::string> class_names_;
  std::vector<PauliVector> pixels_;
  std::vector<std::uint8_t> labels_;
};

/// Row-major grid of coherency matrices.
struct CoherencyField {
  std::size_t height = 0, width = 0;
  std::vector<CoherencyMatrix> cells;

  const CoherencyMatrix& at(std::size_t r, std::size_t c) const { return cells[r * width + c]; }
};

/// Boxcar average of k k^H over an odd w x w window clipped at the borders.
CoherencyField coherency_field(const PolsarField& field, std::size_t boxcar);

enum class Representation : unsigned char { coherency, pauli };
std::string to_string(Representation r);
Representation representation_from_string(const std::string& s);

/// Channels per pixel: coherency 6 complex / 9 real, Pauli 3 complex / 6 real.
std::size_t channel_count(Representation r, Domain d);

/// Encodings of one pixel. Coherency complex order: T00, T01, T02, T11, T12,
/// T22. Coherency real: T00, T11, T22, Re T01, Im T01, Re T02, Im T02,
/// Re T12, Im T12. Pauli real: Re k0..k2 then Im k0..k2.
std::vector<cplx> encode_coherency_complex(const CoherencyMatrix& t);
std::vector<double> encode_coherency_real(const CoherencyMatrix& t);
std::vector<cplx> encode_pauli_complex(const PauliVector& k);
std::vector<double> encode_pauli_real(const PauliVector& k);
/// Hermitian completion from the 9 real channels.
Matrix3 decode_coherency_real(std::span<const double> channels);
Matrix3 decode_coherency_complex(std::span<const cplx> channels);

/// H x W x C feature tensor for the network of the given domain.
Value encode_field(const PolsarField& field, Representation rep, Domain domain, std::size_t boxcar);

// ---------------------------------------------------------------- synthesis

enum class Layout : unsigned char { blocks, voronoi };

struct ClassRecipe {
  std::string name;
  double proportion = 0.0;
  Matrix3 covariance{};  // Hermitian PSD, Pauli basis
};

struct SceneRecipe {
  std::size_t height = 256, width = 256;
  Layout layout = Layout::blocks;
  std::size_t block_size = 16;     // blocks layout
  std::size_t voronoi_seeds = 64;  // voronoi layout
  std::uint64_t seed = 1;
  std::vector<ClassRecipe> classes;
};

/// Four classes with airport-scene proportions (Open Area 73.20%, Wood Land
/// 5.76%, Built-up Area 14.43%, Runway 6.61%).
SceneRecipe imbalanced_recipe(std::size_t height = 256, std::size_t width = 256, std::uint64_t seed = 1);
/// Same classes, equal proportions.
SceneRecipe balanced_recipe(std::size_t height = 256, std::size_t width = 256, std::uint64_t seed = 1);

/// Throws ConfigError when a covariance is not Hermitian PSD or the
/// proportions do not sum to 1.
void validate_recipe(const SceneRecipe& recipe);

/// Per class c, pixels draw k ~ CN(0, Sigma_c) by coloring a standard complex
/// normal triple with the Cholesky factor of Sigma_c. Pure function of the
/// recipe.
PolsarField generate_scene(const SceneRecipe& recipe);

double frobenius_distance(const Matrix3& a, const Matrix3& b);

/// JSON form: {"height", "width", "layout": "blocks"|"voronoi", "block_size",
/// "voronoi_seeds", "seed", "preset"?, "classes": [{"name", "proportion",
/// "covariance": [[re, im] x 9]}]}. A "preset" of balanced|imbalanced fills in
/// the classes when they are omitted.
SceneRecipe recipe_from_json(const nlohmann::json& j);
nlohmann::json recipe_to_json(const SceneRecipe& recipe);
SceneRecipe preset_recipe(const std::string& name, std::size_t height, std::size_t width, std::uint64_t seed);

// ---------------------------------------------------------------- file I/O

void write_scene(const PolsarField& field, const std::filesystem::path& path);
PolsarField read_scene(const std::filesystem::path& path);

}  // namespace cvnn::polsar
