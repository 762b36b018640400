#include "cvnn/nn/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "json.hpp"

#include "cvnn/detail/binary_io.hpp"

namespace cvnn::nn {

namespace {

using nlohmann::json;

struct Entry {
  std::string name;
  std::string kind;             // "parameter" or "state"
  Value* param = nullptr;       // set for parameters
  BNState* state = nullptr;     // set for running statistics
  bool mean = false;            // running_mean (true) or running_cov (false)

  Value get() const {
    if (param) return *param;
    return mean ? Value(state->running_mean) : Value(state->running_cov);
  }
  void set(Value v) const {
    if (param) *param = std::move(v);
    else if (mean) state->running_mean = std::move(v.complex());
    else state->running_cov = std::move(v.real());
  }
};

std::vector<Entry> collect(Network& net) {
  std::vector<Entry> out;
  for (Layer* layer : net.layers()) {
    for (Parameter* p : layer->parameters()) out.push_back({p->name(), "parameter", &p->value()});
    if (BNState* s = layer->bn_state()) {
      out.push_back({layer->name() + ".running_mean", "state", nullptr, s, true});
      out.push_back({layer->name() + ".running_cov", "state", nullptr, s, false});
    }
  }
  return out;
}

}  // namespace

void save_checkpoint(Network& net, const std::filesystem::path& stem) {
  std::filesystem::path bin = stem, manifest = stem;
  bin += ".bin";
  manifest += ".json";
  std::ofstream os(bin, std::ios::binary);
  if (!os) throw FormatError("cannot open " + bin.string() + " for writing");

  const auto entries = collect(net);
  std::uint64_t offset = 0;
  json items = json::array();
  for (const Entry& e : entries) {
    const Value v = e.get();
    json item{{"name", e.name},
              {"kind", e.kind},
              {"shape", v.shape()},
              {"domain", to_string(v.domain())},
              {"offset", offset},
              {"planes", v.is_complex() ? json::array({"re", "im"}) : json::array({"re"})}};
    if (v.is_complex()) {
      for (const cplx& z : v.complex().values()) detail::write_f64_le(os, z.real());
      for (const cplx& z : v.complex().values()) detail::write_f64_le(os, z.imag());
    } else {
      for (double d : v.real().values()) detail::write_f64_le(os, d);
    }
    offset += 8 * v.real_scalar_count();
    items.push_back(std::move(item));
  }
  json doc{{"format", "cvnn-checkpoint"}, {"version", 1}, {"byte_order", "little"}, {"dtype", "f64"},
           {"binary", bin.filename().string()}, {"bytes", offset}, {"tensors", items}};
  std::ofstream ms(manifest);
  if (!ms) throw FormatError("cannot open " + manifest.string() + " for writing");
  ms << doc.dump(2) << '\n';
}

void load_checkpoint(Network& net, const std::filesystem::path& stem) {
  std::filesystem::path bin = stem, manifest = stem;
  bin += ".bin";
  manifest += ".json";
  std::ifstream ms(manifest);
  if (!ms) throw FormatError("cannot open " + manifest.string());
  json doc;
  try {
    doc = json::parse(ms);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint manifest: ") + e.what());
  }
  std::ifstream is(bin, std::ios::binary);
  if (!is) throw FormatError("cannot open " + bin.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() != doc.at("bytes").get<std::uint64_t>()) {
    throw FormatError("checkpoint payload has " + std::to_string(bytes.size()) + " bytes, manifest says " +
                      std::to_string(doc.at("bytes").get<std::uint64_t>()));
  }

  const auto entries = collect(net);
  const json& items = doc.at("tensors");
  if (items.size() != entries.size()) throw FormatError("checkpoint tensor count does not match the network");
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const json& item = items[k];
    const Entry& e = entries[k];
    if (item.at("name").get<std::string>() != e.name) {
      throw FormatError("checkpoint entry '" + item.at("name").get<std::string>() + "' where '" + e.name +
                        "' was expected");
    }
    Value target = e.get();
    if (item.at("shape").get<Shape>() != target.shape() ||
        domain_from_string(item.at("domain").get<std::string>()) != target.domain()) {
      throw FormatError("checkpoint entry '" + e.name + "' has a different shape or domain");
    }
    const std::uint64_t off = item.at("offset").get<std::uint64_t>();
    if (off + 8 * target.real_scalar_count() > bytes.size()) throw FormatError("checkpoint entry out of range");
    const unsigned char* p = bytes.data() + off;
    const std::size_t n = target.size();
    if (target.is_complex()) {
      auto& t = target.complex();
      for (std::size_t i = 0; i < n; ++i) {
        t[i] = cplx(detail::decode_f64_le(p + 8 * i), detail::decode_f64_le(p + 8 * (n + i)));
      }
    } else {
      auto& t = target.real();
      for (std::size_t i = 0; i < n; ++i) t[i] = detail::decode_f64_le(p + 8 * i);
    }
    e.set(std::move(target));
  }
}

}  // namespace cvnn::nn
