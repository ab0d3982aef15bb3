#include "dbnet/model_io.hpp"

#include <cstring>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace dbnet {

using json = nlohmann::json;

namespace {

constexpr char kMagic[8] = {'D', 'B', 'N', 'E', 'T', 'M', 'D', 'L'};

json init_to_json(const InitScheme& s) {
  json j;
  switch (s.kind) {
    case InitScheme::Kind::Constant:
      j["kind"] = "constant";
      j["value"] = s.a;
      break;
    case InitScheme::Kind::BernoulliMix:
      j["kind"] = "bernoulli_mix";
      j["hi"] = s.a;
      j["lo"] = s.b;
      j["p_hi"] = s.p;
      break;
    case InitScheme::Kind::Uniform:
      j["kind"] = "uniform";
      j["lo"] = s.a;
      j["hi"] = s.b;
      break;
  }
  return j;
}

InitScheme init_from_json(const json& j) {
  const std::string kind = j.at("kind");
  if (kind == "constant") return InitScheme::constant(j.at("value"));
  if (kind == "bernoulli_mix")
    return InitScheme::bernoulli_mix(j.at("hi"), j.at("lo"), j.at("p_hi"));
  if (kind == "uniform") return InitScheme::uniform(j.at("lo"), j.at("hi"));
  throw std::invalid_argument("unknown init scheme: " + kind);
}

json shape_to_json(const Shape& s) {
  if (s.rank == 1) return json::array({s.rows});
  return json::array({s.rows, s.cols});
}

Shape shape_from_json(const json& j) {
  if (j.size() == 1) return Shape::vec(j[0].get<std::size_t>());
  return Shape::mat(j[0].get<std::size_t>(), j[1].get<std::size_t>());
}

json spec_to_json_obj(const NetSpec& spec) {
  json j;
  j["input_width"] = spec.input_width;
  j["n_labels"] = spec.n_labels;
  j["experiment"] = spec.experiment;
  j["feature_names"] = spec.feature_names;
  json layers = json::array();
  for (const auto& l : spec.layers) {
    json lj;
    lj["kind"] = layer_kind_name(l.kind);
    if (is_weighted(l.kind)) {
      lj["width"] = l.width;
      lj["in_width"] = l.in_width;
      lj["init"] = init_to_json(l.init);
    } else if (l.kind == LayerKind::BucketSum ||
               l.kind == LayerKind::MaxReduceGroups) {
      lj["width"] = l.width;
    } else if (l.kind == LayerKind::Dropout) {
      lj["p"] = l.dropout_p;
    } else if (l.kind == LayerKind::Reshape) {
      lj["to"] = shape_to_json(l.reshape_to);
    } else if (l.kind == LayerKind::ConcatNegation) {
      lj["negated_first"] = l.negated_first;
    }
    layers.push_back(lj);
  }
  j["layers"] = layers;
  return j;
}

NetSpec spec_from_json_obj(const json& j) {
  NetSpec spec;
  spec.input_width = j.at("input_width");
  spec.n_labels = j.at("n_labels");
  spec.experiment = j.value("experiment", std::string());
  spec.feature_names =
      j.value("feature_names", std::vector<std::string>{});
  for (const auto& lj : j.at("layers")) {
    LayerSpec l;
    l.kind = layer_kind_from_name(lj.at("kind"));
    if (is_weighted(l.kind)) {
      l.width = lj.at("width");
      l.init = init_from_json(lj.at("init"));
    } else if (l.kind == LayerKind::BucketSum ||
               l.kind == LayerKind::MaxReduceGroups) {
      l.width = lj.at("width");
    } else if (l.kind == LayerKind::Dropout) {
      l.dropout_p = lj.at("p");
    } else if (l.kind == LayerKind::Reshape) {
      l.reshape_to = shape_from_json(lj.at("to"));
    } else if (l.kind == LayerKind::ConcatNegation) {
      l.negated_first = lj.value("negated_first", false);
    }
    spec.layers.push_back(l);
  }
  spec.validate();
  return spec;
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const uint8_t* p) {
  return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) |
         (uint32_t(p[3]) << 24);
}

}  // namespace

std::string netspec_to_json(const NetSpec& spec) {
  return spec_to_json_obj(spec).dump(2);
}

NetSpec netspec_from_json(const std::string& text) {
  return spec_from_json_obj(json::parse(text));
}

void save_model(const std::string& path, const ModelFile& m) {
  json header;
  header["version"] = m.version;
  header["aspect"] = m.aspect == Aspect::Soft ? "soft" : "hard";
  header["seed"] = m.seed;
  header["provenance"] = m.provenance;
  header["netspec"] = spec_to_json_obj(m.spec);
  const std::size_t bits = m.spec.weight_bits();
  if (m.aspect == Aspect::Soft) {
    if (m.soft_weights.size() != bits)
      throw std::invalid_argument("save_model: soft payload length mismatch");
    header["payload"] = {{"kind", "float32"}, {"count", bits}};
  } else {
    std::size_t got = 0;
    for (const auto& b : m.hard_blocks) got += b.size();
    if (got != bits)
      throw std::invalid_argument("save_model: hard payload bit count mismatch");
    header["payload"] = {{"kind", "packed_bits"}, {"count", bits}};
  }
  const std::string hj = header.dump();

  std::string out;
  out.append(kMagic, sizeof kMagic);
  put_u32(out, static_cast<uint32_t>(hj.size()));
  out += hj;
  if (m.aspect == Aspect::Soft) {
    for (float f : m.soft_weights) {
      char buf[4];
      std::memcpy(buf, &f, 4);
      out.append(buf, 4);  // little-endian hosts only; documented in README
    }
  } else {
    for (const auto& b : m.hard_blocks) {
      auto bytes = b.to_bytes();
      out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write model file: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("short write to model file: " + path);
}

ModelFile load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open model file: " + path);
  std::string data((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  if (data.size() < sizeof(kMagic) + 4 ||
      std::memcmp(data.data(), kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("not a model file: " + path);
  const uint32_t hlen =
      get_u32(reinterpret_cast<const uint8_t*>(data.data()) + sizeof kMagic);
  const std::size_t header_at = sizeof(kMagic) + 4;
  if (data.size() < header_at + hlen)
    throw std::runtime_error("truncated model header: " + path);
  const json header = json::parse(data.substr(header_at, hlen));

  ModelFile m;
  m.version = header.at("version");
  if (m.version != 1)
    throw std::runtime_error("unsupported model version " +
                             std::to_string(m.version));
  const std::string aspect = header.at("aspect");
  m.aspect = aspect == "soft" ? Aspect::Soft : Aspect::Hard;
  if (aspect != "soft" && aspect != "hard")
    throw std::runtime_error("unknown model aspect: " + aspect);
  m.seed = header.at("seed");
  m.provenance = header.value("provenance", std::string());
  m.spec = spec_from_json_obj(header.at("netspec"));

  const std::size_t bits = m.spec.weight_bits();
  const char* payload = data.data() + header_at + hlen;
  const std::size_t payload_len = data.size() - header_at - hlen;
  if (m.aspect == Aspect::Soft) {
    if (payload_len != bits * 4)
      throw std::runtime_error("soft payload length mismatch in " + path);
    m.soft_weights.resize(bits);
    std::memcpy(m.soft_weights.data(), payload, payload_len);
  } else {
    std::size_t at = 0;
    for (Shape s : m.spec.weight_shapes()) {
      const std::size_t nbytes = (s.size() + 7) / 8;
      if (at + nbytes > payload_len)
        throw std::runtime_error("hard payload truncated in " + path);
      m.hard_blocks.push_back(HardVec::from_bytes(
          {reinterpret_cast<const uint8_t*>(payload) + at, nbytes}, s.size()));
      at += nbytes;
    }
    if (at != payload_len)
      throw std::runtime_error("hard payload length mismatch in " + path);
  }
  return m;
}

ModelFile soft_model_from(const SoftNet& net, uint64_t seed,
                          std::string provenance) {
  ModelFile m;
  m.aspect = Aspect::Soft;
  m.seed = seed;
  m.provenance = std::move(provenance);
  m.spec = net.spec;
  for (const auto& w : net.weights)
    for (double v : w.data) {
      float f = static_cast<float>(v);
      // keep the stored weight on the same side of the threshold as the
      // double it came from, so the loaded model hardens identically
      if (f == 0.5f)
        f = v > 0.5 ? std::nextafter(0.5f, 1.0f) : std::nextafter(0.5f, 0.0f);
      m.soft_weights.push_back(f);
    }
  return m;
}

SoftNet to_soft_net(const ModelFile& m) {
  if (m.aspect != Aspect::Soft)
    throw std::invalid_argument("to_soft_net: model holds hard weights");
  SoftNet net = SoftNet::create(m.spec);
  std::size_t at = 0;
  for (auto& w : net.weights)
    for (auto& v : w.data) v = static_cast<double>(m.soft_weights[at++]);
  return net;
}

HardNet to_hard_net(const ModelFile& m) {
  if (m.aspect == Aspect::Hard) return assemble_hard_net(m.spec, m.hard_blocks);
  return harden_net(to_soft_net(m));
}

ModelFile harden_model(const ModelFile& soft) {
  if (soft.aspect != Aspect::Soft)
    throw std::invalid_argument("harden_model: model is already hard");
  HardNet h = harden_net(to_soft_net(soft));
  ModelFile m;
  m.aspect = Aspect::Hard;
  m.seed = soft.seed;
  m.provenance = soft.provenance;
  m.spec = soft.spec;
  m.hard_blocks = std::move(h.weight_blocks);
  return m;
}

}  // namespace dbnet
