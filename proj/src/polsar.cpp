#include "cvnn/polsar.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <tuple>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "cvnn/detail/binary_io.hpp"
#include "cvnn/errors.hpp"
#include "cvnn/random.hpp"

namespace cvnn::polsar {

using nlohmann::json;

namespace {

constexpr double kInvSqrt2 = 0.7071067811865476;

}  // namespace

PauliVector scattering_to_pauli(const ScatteringVector& s) {
  const cplx hv = s.hv_scaled * kInvSqrt2;
  return {(s.hh + s.vv) * kInvSqrt2, (s.hh - s.vv) * kInvSqrt2, 2.0 * hv * kInvSqrt2};
}

double norm(const ScatteringVector& s) {
  return std::sqrt(std::norm(s.hh) + std::norm(s.hv_scaled) + std::norm(s.vv));
}

double norm(const PauliVector& k) { return std::sqrt(std::norm(k[0]) + std::norm(k[1]) + std::norm(k[2])); }

namespace {

// Upper triangle accumulated, lower triangle mirrored, diagonal forced real.
void accumulate_outer(Matrix3& acc, const PauliVector& k) {
  for (std::size_t i = 0; i < 3; ++i) {
    acc[3 * i + i] += std::norm(k[i]);
    for (std::size_t j = i + 1; j < 3; ++j) acc[3 * i + j] += k[i] * std::conj(k[j]);
  }
}

CoherencyMatrix finish(Matrix3 acc, std::size_t n) {
  CoherencyMatrix out;
  out.n = n;
  const double inv = n ? 1.0 / static_cast<double>(n) : 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    out.t[3 * i + i] = cplx(acc[3 * i + i].real() * inv, 0.0);
    for (std::size_t j = i + 1; j < 3; ++j) {
      out.t[3 * i + j] = acc[3 * i + j] * inv;
      out.t[3 * j + i] = std::conj(out.t[3 * i + j]);
    }
  }
  return out;
}

}  // namespace

CoherencyMatrix coherency_matrix(std::span<const PauliVector> ks) {
  Matrix3 acc{};
  for (const auto& k : ks) accumulate_outer(acc, k);
  return finish(acc, ks.size());
}

PolsarField::PolsarField(std::size_t height, std::size_t width, std::vector<std::string> class_names)
    : height_(height),
      width_(width),
      class_names_(std::move(class_names)),
      pixels_(height * width),
      labels_(height * width, kUnlabeled) {
  if (class_names_.size() >= kUnlabeled) throw ContractError("too many classes for 8-bit labels");
}

PolsarField PolsarField::columns(std::size_t begin, std::size_t end) const {
  if (begin > end || end > width_) throw ContractError("column range out of bounds");
  PolsarField out(height_, end - begin, class_names_);
  for (std::size_t r = 0; r < height_; ++r) {
    for (std::size_t c = begin; c < end; ++c) {
      out.pauli(r, c - begin) = pauli(r, c);
      out.label(r, c - begin) = label(r, c);
    }
  }
  return out;
}

std::vector<std::size_t> PolsarField::class_counts() const {
  std::vector<std::size_t> counts(classes(), 0);
  for (std::uint8_t l : labels_)
    if (l != kUnlabeled) ++counts.at(l);
  return counts;
}

CoherencyField coherency_field(const PolsarField& field, std::size_t boxcar) {
  if (boxcar % 2 == 0) throw ContractError("boxcar window must be odd");
  if (boxcar > std::min(field.height(), field.width())) {
    throw ContractError("boxcar window larger than the field");
  }
  const std::size_t h = field.height(), w = field.width(), half = boxcar / 2;

  // Per-pixel outer products, then horizontal then vertical box sums.
  std::vector<Matrix3> outer(h * w, Matrix3{});
  for (std::size_t i = 0; i < h * w; ++i) accumulate_outer(outer[i], field.pixels()[i]);

  std::vector<Matrix3> rows(h * w, Matrix3{});
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t c0 = c >= half ? c - half : 0, c1 = std::min(w, c + half + 1);
      Matrix3& acc = rows[r * w + c];
      for (std::size_t cc = c0; cc < c1; ++cc)
        for (std::size_t e = 0; e < 9; ++e) acc[e] += outer[r * w + cc][e];
    }
  }

  CoherencyField out{h, w, std::vector<CoherencyMatrix>(h * w)};
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t r0 = r >= half ? r - half : 0, r1 = std::min(h, r + half + 1);
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t c0 = c >= half ? c - half : 0, c1 = std::min(w, c + half + 1);
      Matrix3 acc{};
      for (std::size_t rr = r0; rr < r1; ++rr)
        for (std::size_t e = 0; e < 9; ++e) acc[e] += rows[rr * w + c][e];
      out.cells[r * w + c] = finish(acc, (r1 - r0) * (c1 - c0));
    }
  }
  return out;
}

std::string to_string(Representation r) { return r == Representation::coherency ? "coherency" : "pauli"; }

Representation representation_from_string(const std::string& s) {
  if (s == "coherency") return Representation::coherency;
  if (s == "pauli") return Representation::pauli;
  throw ConfigError("unknown representation '" + s + "'");
}

std::size_t channel_count(Representation r, Domain d) {
  if (r == Representation::coherency) return d == Domain::complex ? 6 : 9;
  return d == Domain::complex ? 3 : 6;
}

std::vector<cplx> encode_coherency_complex(const CoherencyMatrix& t) {
  return {cplx(t(0, 0).real(), 0.0), t(0, 1), t(0, 2), cplx(t(1, 1).real(), 0.0), t(1, 2), cplx(t(2, 2).real(), 0.0)};
}

std::vector<double> encode_coherency_real(const CoherencyMatrix& t) {
  return {t(0, 0).real(), t(1, 1).real(), t(2, 2).real(), t(0, 1).real(), t(0, 1).imag(),
          t(0, 2).real(), t(0, 2).imag(), t(1, 2).real(), t(1, 2).imag()};
}

std::vector<cplx> encode_pauli_complex(const PauliVector& k) { return {k[0], k[1], k[2]}; }

std::vector<double> encode_pauli_real(const PauliVector& k) {
  return {k[0].real(), k[1].real(), k[2].real(), k[0].imag(), k[1].imag(), k[2].imag()};
}

namespace {

Matrix3 hermitian_from(double d0, double d1, double d2, cplx t01, cplx t02, cplx t12) {
  Matrix3 m{};
  m[0] = d0;
  m[4] = d1;
  m[8] = d2;
  m[1] = t01;
  m[2] = t02;
  m[5] = t12;
  m[3] = std::conj(t01);
  m[6] = std::conj(t02);
  m[7] = std::conj(t12);
  return m;
}

}  // namespace

Matrix3 decode_coherency_real(std::span<const double> ch) {
  if (ch.size() != 9) throw DimensionError("real coherency encoding has 9 channels");
  return hermitian_from(ch[0], ch[1], ch[2], {ch[3], ch[4]}, {ch[5], ch[6]}, {ch[7], ch[8]});
}

Matrix3 decode_coherency_complex(std::span<const cplx> ch) {
  if (ch.size() != 6) throw DimensionError("complex coherency encoding has 6 channels");
  return hermitian_from(ch[0].real(), ch[3].real(), ch[5].real(), ch[1], ch[2], ch[4]);
}

Value encode_field(const PolsarField& field, Representation rep, Domain domain, std::size_t boxcar) {
  const std::size_t h = field.height(), w = field.width(), nc = channel_count(rep, domain);
  auto fill = [&](auto& tensor, auto encode) {
    for (std::size_t i = 0; i < h * w; ++i) {
      const auto ch = encode(i);
      std::copy(ch.begin(), ch.end(), tensor.data() + i * nc);
    }
  };
  if (rep == Representation::pauli) {
    const auto& px = field.pixels();
    if (domain == Domain::complex) {
      CTensor t({h, w, nc});
      fill(t, [&](std::size_t i) { return encode_pauli_complex(px[i]); });
      return Value(std::move(t));
    }
    RTensor t({h, w, nc});
    fill(t, [&](std::size_t i) { return encode_pauli_real(px[i]); });
    return Value(std::move(t));
  }
  const CoherencyField cf = coherency_field(field, boxcar);
  if (domain == Domain::complex) {
    CTensor t({h, w, nc});
    fill(t, [&](std::size_t i) { return encode_coherency_complex(cf.cells[i]); });
    return Value(std::move(t));
  }
  RTensor t({h, w, nc});
  fill(t, [&](std::size_t i) { return encode_coherency_real(cf.cells[i]); });
  return Value(std::move(t));
}

// ---------------------------------------------------------------- synthesis

namespace {

using Mat3 = Eigen::Matrix3cd;

Mat3 to_eigen(const Matrix3& m) {
  Mat3 e;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) e(i, j) = m[3 * i + j];
  return e;
}

Matrix3 diag(double a, double b, double c) {
  Matrix3 m{};
  m[0] = a;
  m[4] = b;
  m[8] = c;
  return m;
}

std::vector<ClassRecipe> default_classes() {
  // Surface, volume, double-bounce and dark specular returns. Wood Land sits
  // close to Open Area (Frobenius distance 1.03) so class priors matter.
  return {{"Open Area", 0.7320, diag(3.0, 1.0, 0.5)},
          {"Wood Land", 0.0576, diag(3.9, 1.4, 0.8)},
          {"Built-up Area", 0.1443, diag(0.6, 2.6, 0.5)},
          {"Runway", 0.0661, diag(0.12, 0.04, 0.02)}};
}

// Coloring factor L with L L^H = sigma. Cholesky first, eigen square root for
// singular PSD matrices.
Mat3 coloring_factor(const Matrix3& sigma, const std::string& name) {
  const Mat3 s = to_eigen(sigma);
  if ((s - s.adjoint()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ConfigError("covariance of class '" + name + "' is not Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(s);
  const auto& lambda = eig.eigenvalues();
  const double tol = 1e-10 * std::max(1.0, lambda.cwiseAbs().maxCoeff());
  if (lambda.minCoeff() < -tol) {
    throw ConfigError("covariance of class '" + name + "' is not positive semi-definite");
  }
  Eigen::LLT<Mat3> llt(s);
  if (llt.info() == Eigen::Success && lambda.minCoeff() > tol) return llt.matrixL();
  Eigen::Vector3d root = lambda.cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

// Largest-remainder apportionment of `total` items.
std::vector<std::size_t> apportion(const std::vector<ClassRecipe>& classes, std::size_t total) {
  std::vector<std::size_t> quota(classes.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t used = 0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const double exact = classes[c].proportion * static_cast<double>(total);
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    used += quota[c];
    rem.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; used < total; ++i, ++used) ++quota[rem[i % rem.size()].second];
  return quota;
}

void layout_blocks(const SceneRecipe& recipe, PolsarField& field, Rng& rng) {
  const std::size_t b = recipe.block_size;
  const std::size_t br = (recipe.height + b - 1) / b, bc = (recipe.width + b - 1) / b;
  const auto quota = apportion(recipe.classes, br * bc);
  std::vector<std::uint8_t> blocks;
  for (std::size_t c = 0; c < quota.size(); ++c) blocks.insert(blocks.end(), quota[c], static_cast<std::uint8_t>(c));
  shuffle(blocks.begin(), blocks.end(), rng);
  for (std::size_t r = 0; r < recipe.height; ++r)
    for (std::size_t c = 0; c < recipe.width; ++c) field.label(r, c) = blocks[(r / b) * bc + c / b];
}

void layout_voronoi(const SceneRecipe& recipe, PolsarField& field, Rng& rng) {
  const std::size_t n = recipe.voronoi_seeds, h = recipe.height, w = recipe.width;
  std::vector<std::pair<double, double>> seeds(n);
  for (auto& s : seeds) {
    s.first = uniform01(rng) * static_cast<double>(h);
    s.second = uniform01(rng) * static_cast<double>(w);
  }
  std::vector<std::size_t> rank(n);
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  shuffle(rank.begin(), rank.end(), rng);

  // Pixels ordered by (shuffled cell rank, distance to the cell seed); classes
  // then take consecutive runs, so pixel quotas are exact and each class is a
  // union of whole cells except where two runs meet inside one cell.
  struct Key {
    std::size_t rank;
    double dist;
    std::size_t pixel;
  };
  std::vector<Key> keys(h * w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double best = INFINITY;
      std::size_t arg = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double dr = seeds[i].first - (static_cast<double>(r) + 0.5);
        const double dc = seeds[i].second - (static_cast<double>(c) + 0.5);
        const double d = dr * dr + dc * dc;
        if (d < best) {
          best = d;
          arg = i;
        }
      }
      keys[r * w + c] = {rank[arg], best, r * w + c};
    }
  }
  std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
    return std::tie(a.rank, a.dist, a.pixel) < std::tie(b.rank, b.dist, b.pixel);
  });
  const auto quota = apportion(recipe.classes, h * w);
  std::size_t pos = 0;
  for (std::size_t c = 0; c < quota.size(); ++c) {
    for (std::size_t q = 0; q < quota[c]; ++q) field.labels()[keys[pos++].pixel] = static_cast<std::uint8_t>(c);
  }
}

}  // namespace

SceneRecipe imbalanced_recipe(std::size_t height, std::size_t width, std::uint64_t seed) {
  SceneRecipe r;
  r.height = height;
  r.width = width;
  r.seed = seed;
  r.classes = default_classes();
  return r;
}

SceneRecipe balanced_recipe(std::size_t height, std::size_t width, std::uint64_t seed) {
  SceneRecipe r = imbalanced_recipe(height, width, seed);
  for (auto& c : r.classes) c.proportion = 1.0 / static_cast<double>(r.classes.size());
  return r;
}

SceneRecipe preset_recipe(const std::string& name, std::size_t height, std::size_t width, std::uint64_t seed) {
  if (name == "balanced") return balanced_recipe(height, width, seed);
  if (name == "imbalanced") return imbalanced_recipe(height, width, seed);
  throw ConfigError("unknown scene preset '" + name + "'");
}

void validate_recipe(const SceneRecipe& recipe) {
  if (recipe.height == 0 || recipe.width == 0) throw ConfigError("scene dimensions must be positive");
  if (recipe.classes.empty()) throw ConfigError("recipe has no classes");
  if (recipe.classes.size() >= kUnlabeled) throw ConfigError("too many classes");
  if (recipe.layout == Layout::blocks && recipe.block_size == 0) throw ConfigError("block_size must be positive");
  if (recipe.layout == Layout::voronoi && recipe.voronoi_seeds == 0) {
    throw ConfigError("voronoi_seeds must be positive");
  }
  double total = 0.0;
  for (const auto& c : recipe.classes) {
    if (!(c.proportion >= 0.0)) throw ConfigError("negative proportion for class '" + c.name + "'");
    total += c.proportion;
    coloring_factor(c.covariance, c.name);
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("class proportions sum to " + std::to_string(total));
}

PolsarField generate_scene(const SceneRecipe& recipe) {
  validate_recipe(recipe);
  std::vector<std::string> names;
  std::vector<Mat3> factors;
  for (const auto& c : recipe.classes) {
    names.push_back(c.name);
    factors.push_back(coloring_factor(c.covariance, c.name));
  }
  PolsarField field(recipe.height, recipe.width, names);
  Rng layout_rng = make_rng(recipe.seed, {0});
  if (recipe.layout == Layout::blocks) {
    layout_blocks(recipe, field, layout_rng);
  } else {
    layout_voronoi(recipe, field, layout_rng);
  }

  Rng rng = make_rng(recipe.seed, {1});
  for (std::size_t i = 0; i < field.pixels().size(); ++i) {
    Eigen::Vector3cd z;
    for (int j = 0; j < 3; ++j) {
      const auto [a, b] = normal_pair(rng);
      z(j) = cplx(a, b) * kInvSqrt2;  // E|z|^2 = 1
    }
    const Eigen::Vector3cd k = factors[field.labels()[i]] * z;
    field.pixels()[i] = {k(0), k(1), k(2)};
  }
  return field;
}

double frobenius_distance(const Matrix3& a, const Matrix3& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < 9; ++i) s += std::norm(a[i] - b[i]);
  return std::sqrt(s);
}

namespace {

std::string layout_name(Layout l) { return l == Layout::blocks ? "blocks" : "voronoi"; }

Layout layout_from(const std::string& s) {
  if (s == "blocks") return Layout::blocks;
  if (s == "voronoi") return Layout::voronoi;
  throw ConfigError("unknown layout '" + s + "'");
}

}  // namespace

SceneRecipe recipe_from_json(const json& j) {
  try {
    const std::size_t h = j.value("height", std::size_t{256});
    const std::size_t w = j.value("width", std::size_t{256});
    const std::uint64_t seed = j.value("seed", std::uint64_t{1});
    SceneRecipe r = preset_recipe(j.value("preset", std::string("imbalanced")), h, w, seed);
    r.layout = layout_from(j.value("layout", std::string("blocks")));
    r.block_size = j.value("block_size", r.block_size);
    r.voronoi_seeds = j.value("voronoi_seeds", r.voronoi_seeds);
    if (j.contains("classes")) {
      r.classes.clear();
      for (const auto& jc : j.at("classes")) {
        ClassRecipe c;
        c.name = jc.at("name").get<std::string>();
        c.proportion = jc.at("proportion").get<double>();
        const auto& cov = jc.at("covariance");
        if (cov.size() != 9) throw ConfigError("covariance of '" + c.name + "' needs 9 [re, im] entries");
        for (std::size_t i = 0; i < 9; ++i) {
          const auto& e = cov.at(i);
          c.covariance[i] = e.is_number() ? cplx(e.get<double>(), 0.0) : cplx(e.at(0).get<double>(), e.at(1).get<double>());
        }
        r.classes.push_back(std::move(c));
      }
    }
    validate_recipe(r);
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed scene recipe: ") + e.what());
  }
}

json recipe_to_json(const SceneRecipe& r) {
  json classes = json::array();
  for (const auto& c : r.classes) {
    json cov = json::array();
    for (const cplx& v : c.covariance) cov.push_back({v.real(), v.imag()});
    classes.push_back({{"name", c.name}, {"proportion", c.proportion}, {"covariance", cov}});
  }
  return {{"height", r.height},          {"width", r.width}, {"layout", layout_name(r.layout)},
          {"block_size", r.block_size}, {"voronoi_seeds", r.voronoi_seeds},
          {"seed", r.seed},              {"classes", classes}};
}

// ---------------------------------------------------------------- file I/O

namespace {

constexpr const char* kMagic = "PSCENE";
constexpr int kVersion = 1;

}  // namespace

void write_scene(const PolsarField& field, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  const json header = {{"magic", kMagic},
                       {"version", kVersion},
                       {"height", field.height()},
                       {"width", field.width()},
                       {"class_names", field.class_names()},
                       {"dtype", "c128"},
                       {"label_bytes", field.labels().size()}};
  os << header.dump() << '\n';
  for (const auto& k : field.pixels()) {
    for (const cplx& v : k) {
      detail::write_f64_le(os, v.real());
      detail::write_f64_le(os, v.imag());
    }
  }
  os.write(reinterpret_cast<const char*>(field.labels().data()), static_cast<std::streamsize>(field.labels().size()));
  if (!os) throw Error("failed writing '" + path.string() + "'");
}

PolsarField read_scene(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open scene file '" + path.string() + "'");
  std::string line;
  if (!std::getline(is, line)) throw FormatError("scene file has no header");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception&) {
    throw FormatError("scene header is not valid JSON");
  }
  if (!header.is_object() || header.value("magic", std::string()) != kMagic) {
    throw FormatError("not a scene file: bad magic");
  }
  if (header.value("version", -1) != kVersion) throw FormatError("unsupported scene version");
  if (header.value("dtype", std::string()) != "c128") throw FormatError("unsupported scene dtype");
  std::size_t h = 0, w = 0;
  std::vector<std::string> names;
  try {
    h = header.at("height").get<std::size_t>();
    w = header.at("width").get<std::size_t>();
    names = header.at("class_names").get<std::vector<std::string>>();
  } catch (const json::exception&) {
    throw FormatError("scene header lacks height, width or class_names");
  }
  const std::size_t label_bytes = header.value("label_bytes", h * w);
  if (label_bytes != h * w) {
    throw FormatError("label grid size " + std::to_string(label_bytes) + " does not match " + std::to_string(h) +
                      "x" + std::to_string(w));
  }

  const std::vector<unsigned char> payload((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const std::size_t expected = h * w * 3 * 16 + h * w;
  if (payload.size() != expected) {
    throw FormatError("scene payload length " + std::to_string(payload.size()) + " bytes, expected " +
                      std::to_string(expected));
  }
  PolsarField field(h, w, names);
  const unsigned char* p = payload.data();
  for (auto& k : field.pixels()) {
    for (cplx& v : k) {
      v = cplx(detail::decode_f64_le(p), detail::decode_f64_le(p + 8));
      p += 16;
    }
  }
  std::copy(p, p + h * w, field.labels().begin());
  for (std::uint8_t l : field.labels()) {
    if (l != kUnlabeled && l >= names.size()) throw FormatError("label " + std::to_string(l) + " out of range");
  }
  return field;
}

}  // namespace cvnn::polsar
