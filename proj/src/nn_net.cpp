#include "dart/nn/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "dart/errors.hpp"
#include "dart/hash.hpp"

namespace dart::nn {

using nlohmann::json;

std::string to_string(EncoderKind k) {
  return k == EncoderKind::BiRecurrent ? "bigru" : "meanpool";
}
std::string to_string(CellKind k) { return k == CellKind::Lstm ? "lstm" : "gru"; }

EncoderKind encoder_kind_from_string(const std::string& s) {
  if (s == "bigru") return EncoderKind::BiRecurrent;
  if (s == "meanpool") return EncoderKind::MeanPool;
  throw ConfigError("unknown encoder kind: " + s);
}
CellKind cell_kind_from_string(const std::string& s) {
  if (s == "lstm") return CellKind::Lstm;
  if (s == "gru") return CellKind::Gru;
  throw ConfigError("unknown cell kind: " + s);
}

namespace {

void add_gru(ParameterSet& ps, const std::string& prefix, int in, int hidden) {
  for (const char* gate : {"z", "r", "n"}) {
    ps.add(prefix + ".W" + gate, hidden, in);
    ps.add(prefix + ".U" + gate, hidden, hidden);
    ps.add(prefix + ".b" + gate, hidden, 1);
  }
}

void add_lstm(ParameterSet& ps, const std::string& prefix, int in, int hidden) {
  for (const char* gate : {"i", "f", "g", "o"}) {
    ps.add(prefix + ".W" + gate, hidden, in);
    ps.add(prefix + ".U" + gate, hidden, hidden);
    ps.add(prefix + ".b" + gate, hidden, 1);
  }
}

void add_dense(ParameterSet& ps, const std::string& prefix, int in, int out) {
  ps.add(prefix + ".W", out, in);
  ps.add(prefix + ".b", out, 1);
}

ParameterSet layout(const NetSpec& s) {
  ParameterSet ps;
  if (s.encoder == EncoderKind::BiRecurrent) {
    add_gru(ps, "enc.f", s.entity_dim, s.encoder_hidden);
    add_gru(ps, "enc.b", s.entity_dim, s.encoder_hidden);
  } else {
    add_dense(ps, "enc.pool", s.entity_dim, s.encoder_out());
  }
  if (s.cell == CellKind::Lstm) {
    add_lstm(ps, "cell", s.cell_input(), s.cell_hidden);
  } else {
    add_gru(ps, "cell", s.cell_input(), s.cell_hidden);
  }
  add_dense(ps, "actor", s.cell_hidden, kPolicyActions);
  add_dense(ps, "critic", s.cell_hidden, 1);
  return ps;
}

}  // namespace

PolicyNet PolicyNet::make(const NetSpec& spec, Rng& rng) {
  PolicyNet net{spec, layout(spec)};
  for (auto& [name, m] : net.params.entries()) {
    // Weight matrices scale with fan-in; bias columns stay zero.
    if (m.cols() == 1 && name.find(".b") != std::string::npos) continue;
    const double s = 1.0 / std::sqrt(static_cast<double>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        m(r, c) = rng.uniform(-s, s);
      }
    }
  }
  return net;
}

PolicyNet PolicyNet::zeros(const NetSpec& spec) {
  return PolicyNet{spec, layout(spec)};
}

MemoryState PolicyNet::initial_memory() const {
  MemoryState m;
  m.h = Vec::Zero(spec.cell_hidden);
  m.c = spec.cell == CellKind::Lstm ? Vec::Zero(spec.cell_hidden) : Vec();
  return m;
}

namespace {

GruRefs bind_gru(const ParameterSet& ps, GradBuffer* g, const std::string& p) {
  auto ref = [&](const std::string& n) {
    return ParamRef{&ps.at(p + n), g ? &g->at(p + n) : nullptr};
  };
  return GruRefs{ref(".Wz"), ref(".Wr"), ref(".Wn"), ref(".Uz"), ref(".Ur"),
                 ref(".Un"), ref(".bz"), ref(".br"), ref(".bn")};
}

LstmRefs bind_lstm(const ParameterSet& ps, GradBuffer* g, const std::string& p) {
  auto ref = [&](const std::string& n) {
    return ParamRef{&ps.at(p + n), g ? &g->at(p + n) : nullptr};
  };
  return LstmRefs{ref(".Wi"), ref(".Wf"), ref(".Wg"), ref(".Wo"),
                  ref(".Ui"), ref(".Uf"), ref(".Ug"), ref(".Uo"),
                  ref(".bi"), ref(".bf"), ref(".bg"), ref(".bo")};
}

DenseRefs bind_dense(const ParameterSet& ps, GradBuffer* g,
                     const std::string& p) {
  auto ref = [&](const std::string& n) {
    return ParamRef{&ps.at(p + n), g ? &g->at(p + n) : nullptr};
  };
  return DenseRefs{ref(".W"), ref(".b")};
}

int gru_step(Graph& g, const GruRefs& w, int x, int h) {
  const int z = g.sigmoid(
      g.add(g.add(g.matvec(w.wz, x), g.matvec(w.uz, h)), g.param_vec(w.bz)));
  const int r = g.sigmoid(
      g.add(g.add(g.matvec(w.wr, x), g.matvec(w.ur, h)), g.param_vec(w.br)));
  const int n = g.tanh(g.add(
      g.add(g.matvec(w.wn, x), g.matvec(w.un, g.mul(r, h))), g.param_vec(w.bn)));
  return g.add(g.mul(g.one_minus(z), n), g.mul(z, h));
}

struct LstmOut {
  int h;
  int c;
};

LstmOut lstm_step(Graph& g, const LstmRefs& w, int x, int h, int c) {
  auto gate = [&](const ParamRef& wi, const ParamRef& ui, const ParamRef& bi) {
    return g.add(g.add(g.matvec(wi, x), g.matvec(ui, h)), g.param_vec(bi));
  };
  const int i = g.sigmoid(gate(w.wi, w.ui, w.bi));
  const int f = g.sigmoid(gate(w.wf, w.uf, w.bf));
  const int o = g.sigmoid(gate(w.wo, w.uo, w.bo));
  const int cand = g.tanh(gate(w.wg, w.ug, w.bg));
  const int c_new = g.add(g.mul(f, c), g.mul(i, cand));
  const int h_new = g.mul(o, g.tanh(c_new));
  return {h_new, c_new};
}

int dense(Graph& g, const DenseRefs& w, int x) {
  return g.add(g.matvec(w.w, x), g.param_vec(w.b));
}

}  // namespace

int encode_node(Graph& g, const NetSpec& spec, const NetRefs& refs,
                const std::vector<Vec>& entities) {
  if (entities.empty()) return g.zeros(spec.encoder_out());
  if (spec.encoder == EncoderKind::BiRecurrent) {
    std::vector<int> nodes;
    nodes.reserve(entities.size());
    for (const Vec& e : entities) nodes.push_back(g.input(e));
    int hf = g.zeros(spec.encoder_hidden);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      hf = gru_step(g, refs.enc_f, nodes[k], hf);
    }
    int hb = g.zeros(spec.encoder_hidden);
    for (std::size_t k = nodes.size(); k-- > 0;) {
      hb = gru_step(g, refs.enc_b, nodes[k], hb);
    }
    return g.concat(hf, hb);
  }
  int acc = -1;
  for (const Vec& e : entities) {
    const int emb = g.tanh(dense(g, refs.pool, g.input(e)));
    acc = acc < 0 ? emb : g.add(acc, emb);
  }
  return g.scale(acc, 1.0 / static_cast<double>(entities.size()));
}

Vec encoder_forward(const PolicyNet& net, const std::vector<Vec>& entities) {
  thread_local Graph g;
  g.clear();
  const NetRefs refs = bind(net, nullptr);
  return g.value(encode_node(g, net.spec, refs, entities));
}

NetRefs bind(const PolicyNet& net, GradBuffer* grads) {
  NetRefs refs;
  const ParameterSet& ps = net.params;
  if (net.spec.encoder == EncoderKind::BiRecurrent) {
    refs.enc_f = bind_gru(ps, grads, "enc.f");
    refs.enc_b = bind_gru(ps, grads, "enc.b");
  } else {
    refs.pool = bind_dense(ps, grads, "enc.pool");
  }
  if (net.spec.cell == CellKind::Lstm) {
    refs.lstm = bind_lstm(ps, grads, "cell");
  } else {
    refs.cell_gru = bind_gru(ps, grads, "cell");
  }
  refs.actor = bind_dense(ps, grads, "actor");
  refs.critic = bind_dense(ps, grads, "critic");
  return refs;
}

StepNodes net_step(Graph& g, const NetSpec& spec, const NetRefs& refs,
                   const std::vector<Vec>& entities, const Vec& extra,
                   int h_node, int c_node) {
  const int enc = encode_node(g, spec, refs, entities);
  int x = enc;
  if (spec.extra_dim > 0) x = g.concat(enc, g.input(extra));

  if (h_node < 0) h_node = g.zeros(spec.cell_hidden);
  StepNodes out;
  if (spec.cell == CellKind::Lstm) {
    if (c_node < 0) c_node = g.zeros(spec.cell_hidden);
    const LstmOut lo = lstm_step(g, refs.lstm, x, h_node, c_node);
    out.h = lo.h;
    out.c = lo.c;
  } else {
    out.h = gru_step(g, refs.cell_gru, x, h_node);
    out.c = -1;
  }
  out.logits = dense(g, refs.actor, out.h);
  out.log_probs = g.log_softmax(out.logits);
  out.value = dense(g, refs.critic, out.h);
  return out;
}

ForwardResult forward(const PolicyNet& net, const std::vector<Vec>& entities,
                      const Vec& extra, const MemoryState& memory) {
  thread_local Graph g;
  g.clear();
  const NetRefs refs = bind(net, nullptr);
  const int h = g.input(memory.h);
  const int c = net.spec.cell == CellKind::Lstm ? g.input(memory.c) : -1;
  const StepNodes nodes =
      net_step(g, net.spec, refs, entities, extra, h, c);
  ForwardResult r;
  const Vec lp = g.value(nodes.log_probs);
  for (int a = 0; a < kPolicyActions; ++a) r.probs[a] = std::exp(lp[a]);
  r.value = g.scalar(nodes.value);
  r.memory.h = g.value(nodes.h);
  r.memory.c = nodes.c >= 0 ? g.value(nodes.c) : Vec();
  return r;
}

namespace {

json netspec_to_json(const NetSpec& s) {
  return json{{"encoder", to_string(s.encoder)},
              {"entity_dim", s.entity_dim},
              {"encoder_hidden", s.encoder_hidden},
              {"cell", to_string(s.cell)},
              {"cell_hidden", s.cell_hidden},
              {"extra_dim", s.extra_dim}};
}

NetSpec netspec_from_json(const json& j) {
  NetSpec s;
  s.encoder = encoder_kind_from_string(j.at("encoder").get<std::string>());
  s.entity_dim = j.at("entity_dim").get<int>();
  s.encoder_hidden = j.at("encoder_hidden").get<int>();
  s.cell = cell_kind_from_string(j.at("cell").get<std::string>());
  s.cell_hidden = j.at("cell_hidden").get<int>();
  s.extra_dim = j.at("extra_dim").get<int>();
  return s;
}

constexpr char kMagic[8] = {'D', 'A', 'R', 'T', 'C', 'K', 'P', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const PolicyNet& net) {
  json arrays = json::array();
  for (const auto& [name, m] : net.params.entries()) {
    arrays.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  }
  const json header = {{"format_version", 1},
                       {"param_version", net.params.version},
                       {"netspec", netspec_to_json(net.spec)},
                       {"arrays", arrays}};
  const std::string htext = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw MissingArtifactError("cannot write " + path.string());
  os.write(kMagic, 8);
  write_u64(os, htext.size());
  os.write(htext.data(), static_cast<std::streamsize>(htext.size()));

  std::uint64_t checksum = 0xcbf29ce484222325ULL;
  for (const auto& [name, m] : net.params.entries()) {
    const auto bytes = static_cast<std::size_t>(m.size()) * sizeof(double);
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(bytes));
    checksum = fnv1a64(m.data(), bytes, checksum);
  }
  write_u64(os, checksum);
  if (!os) throw MissingArtifactError("short write to " + path.string());
}

PolicyNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingArtifactError("missing checkpoint " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) {
    throw MissingArtifactError("bad checkpoint magic in " + path.string());
  }
  const std::uint64_t hlen = read_u64(is);
  std::string htext(hlen, '\0');
  is.read(htext.data(), static_cast<std::streamsize>(hlen));
  json header;
  try {
    header = json::parse(htext);
  } catch (const json::parse_error& e) {
    throw MissingArtifactError("corrupt checkpoint header in " + path.string());
  }

  PolicyNet net = PolicyNet::zeros(netspec_from_json(header.at("netspec")));
  net.params.version = header.value("param_version", std::uint64_t{0});

  std::uint64_t checksum = 0xcbf29ce484222325ULL;
  for (const auto& entry : header.at("arrays")) {
    const std::string name = entry.at("name").get<std::string>();
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    Mat& m = net.params.at(name);
    if (m.rows() != rows || m.cols() != cols) {
      throw MissingArtifactError("shape mismatch for " + name + " in " +
                                 path.string());
    }
    const auto bytes = static_cast<std::size_t>(m.size()) * sizeof(double);
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(bytes));
    checksum = fnv1a64(m.data(), bytes, checksum);
  }
  const std::uint64_t expected = read_u64(is);
  if (!is || checksum != expected) {
    throw MissingArtifactError("checksum mismatch in " + path.string());
  }
  return net;
}

std::string file_content_hash(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingArtifactError("missing file " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (is) {
    is.read(buf, sizeof(buf));
    h = fnv1a64(buf, static_cast<std::size_t>(is.gcount()), h);
  }
  return hex64(h);
}

}  // namespace dart::nn
