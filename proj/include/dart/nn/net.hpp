#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "dart/nn/graph.hpp"
#include "dart/nn/params.hpp"
#include "dart/rng.hpp"

namespace dart::nn {

inline constexpr int kPolicyActions = 7;

enum class EncoderKind { BiRecurrent, MeanPool };
enum class CellKind { Lstm, Gru };

// Architecture descriptor. The encoder turns a variable-length entity list
// into a fixed vector of size 2*encoder_hidden; the memory cell runs over
// time; actor emits 7 logits and critic one value.
struct NetSpec {
  EncoderKind encoder = EncoderKind::BiRecurrent;
  int entity_dim = 5;
  int encoder_hidden = 64;
  CellKind cell = CellKind::Lstm;
  int cell_hidden = 128;
  int extra_dim = 0;  // appended to the encoder output (action one-hot or 0)

  int encoder_out() const { return 2 * encoder_hidden; }
  int cell_input() const { return encoder_out() + extra_dim; }

  bool operator==(const NetSpec&) const = default;
};

std::string to_string(EncoderKind k);
std::string to_string(CellKind k);
EncoderKind encoder_kind_from_string(const std::string& s);
CellKind cell_kind_from_string(const std::string& s);

// Recurrent state carried across steps: h for both cell kinds, c only for
// the LSTM (size 0 otherwise).
struct MemoryState {
  Vec h;
  Vec c;
};

struct PolicyNet {
  NetSpec spec;
  ParameterSet params;

  static PolicyNet make(const NetSpec& spec, Rng& rng);  // uniform +-1/sqrt(fan_in)
  static PolicyNet zeros(const NetSpec& spec);

  MemoryState initial_memory() const;
};

struct GruRefs {
  ParamRef wz, wr, wn, uz, ur, un, bz, br, bn;
};
struct LstmRefs {
  ParamRef wi, wf, wg, wo, ui, uf, ug, uo, bi, bf, bg, bo;
};
struct DenseRefs {
  ParamRef w, b;
};

// Parameter references resolved once so graph building does no name lookups.
struct NetRefs {
  GruRefs enc_f, enc_b;
  DenseRefs pool;
  LstmRefs lstm;
  GruRefs cell_gru;
  DenseRefs actor, critic;
};

NetRefs bind(const PolicyNet& net, GradBuffer* grads);

struct StepNodes {
  int logits = -1;
  int log_probs = -1;
  int value = -1;
  int h = -1;
  int c = -1;  // -1 for GRU cells
};

// Variable-length entity list to a fixed vector of size spec.encoder_out();
// the empty list maps to the zero vector.
int encode_node(Graph& g, const NetSpec& spec, const NetRefs& refs,
                const std::vector<Vec>& entities);

Vec encoder_forward(const PolicyNet& net, const std::vector<Vec>& entities);

// One control step as graph nodes. h_node/c_node of -1 start from zero
// memory. `extra` may be empty when spec.extra_dim == 0.
StepNodes net_step(Graph& g, const NetSpec& spec, const NetRefs& refs,
                   const std::vector<Vec>& entities, const Vec& extra,
                   int h_node, int c_node);

struct ForwardResult {
  std::array<double, kPolicyActions> probs;
  double value = 0.0;
  MemoryState memory;
};

// Forward-only convenience used for acting; no gradients are recorded.
ForwardResult forward(const PolicyNet& net, const std::vector<Vec>& entities,
                      const Vec& extra, const MemoryState& memory);

// Checkpoint container: magic, JSON header (format version, net spec, array
// table), raw little-endian doubles, FNV-1a checksum of the payload.
void save_checkpoint(const std::filesystem::path& path, const PolicyNet& net);
PolicyNet load_checkpoint(const std::filesystem::path& path);

// Content hash of an arbitrary file, used by run manifests.
std::string file_content_hash(const std::filesystem::path& path);

}  // namespace dart::nn
