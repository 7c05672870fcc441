#include "radar/nets.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "radar/rng.hpp"

namespace radar {
namespace {

constexpr char kMagic[4] = {'R', 'D', 'R', '1'};
constexpr uint32_t kVersion = 1;
constexpr const char* kArchEntry = "__arch__";

struct ShapeState {
  bool flat = false;
  int c = 0, h = 0, w = 0;  // when !flat
  int n = 0;                // when flat
};

struct ParamPlan {
  std::string name;
  Shape shape;
  int fan_in = 0;  // 0 for biases
};

std::string layer_kind_name(LayerSpec::Kind k) {
  switch (k) {
    case LayerSpec::Kind::conv: return "conv";
    case LayerSpec::Kind::relu: return "relu";
    case LayerSpec::Kind::pool: return "pool";
    case LayerSpec::Kind::flatten: return "flatten";
    case LayerSpec::Kind::dense: return "dense";
    case LayerSpec::Kind::head: return "head";
    case LayerSpec::Kind::save_skip: return "save_skip";
    case LayerSpec::Kind::add_skip: return "add_skip";
  }
  return "?";
}

// Walks the layer list, validating that shapes compose, and returns the
// ordered parameter plan. Throws std::invalid_argument on a bad architecture.
std::vector<ParamPlan> plan_params(const std::vector<LayerSpec>& layers, const ArchConfig& cfg,
                                   bool detector) {
  if (layers.empty()) throw std::invalid_argument("model needs at least one layer");
  if (cfg.in_channels <= 0 || cfg.height <= 0 || cfg.width <= 0 || cfg.num_classes <= 0)
    throw std::invalid_argument("architecture dimensions must be positive");

  std::vector<ParamPlan> plan;
  ShapeState s{false, cfg.in_channels, cfg.height, cfg.width, 0};
  std::vector<ShapeState> skip_stack;
  int head_count = 0;

  for (size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& L = layers[i];
    const std::string base = "layer" + std::to_string(i);
    auto fail = [&](const std::string& why) {
      throw std::invalid_argument(base + " (" + layer_kind_name(L.kind) + "): " + why);
    };
    if (head_count > 0) fail("head must be the last layer");

    switch (L.kind) {
      case LayerSpec::Kind::conv: {
        if (s.flat) fail("conv after flatten");
        if (L.out_channels <= 0 || L.kernel <= 0 || L.stride <= 0 || L.pad < 0)
          fail("bad conv geometry");
        const int hp = s.h + 2 * L.pad, wp = s.w + 2 * L.pad;
        if (L.kernel > hp || L.kernel > wp) fail("kernel larger than padded input");
        if ((hp - L.kernel) % L.stride != 0 || (wp - L.kernel) % L.stride != 0)
          fail("non-integral conv output size");
        plan.push_back({base + ".weight",
                        {L.out_channels, s.c, L.kernel, L.kernel},
                        s.c * L.kernel * L.kernel});
        plan.push_back({base + ".bias", {L.out_channels}, 0});
        s.c = L.out_channels;
        s.h = (hp - L.kernel) / L.stride + 1;
        s.w = (wp - L.kernel) / L.stride + 1;
        break;
      }
      case LayerSpec::Kind::relu:
        break;
      case LayerSpec::Kind::pool:
        if (s.flat) fail("pool after flatten");
        if (s.h % 2 != 0 || s.w % 2 != 0) fail("pool needs even spatial dims");
        s.h /= 2;
        s.w /= 2;
        break;
      case LayerSpec::Kind::flatten:
        if (s.flat) fail("repeated flatten");
        s.flat = true;
        s.n = s.c * s.h * s.w;
        break;
      case LayerSpec::Kind::dense:
      case LayerSpec::Kind::head: {
        if (!s.flat) fail("dense layer before flatten");
        if (L.out_features <= 0) fail("out_features must be positive");
        plan.push_back({base + ".weight", {s.n, L.out_features}, s.n});
        plan.push_back({base + ".bias", {L.out_features}, 0});
        s.n = L.out_features;
        if (L.kind == LayerSpec::Kind::head) ++head_count;
        break;
      }
      case LayerSpec::Kind::save_skip:
        if (s.flat) fail("skip connections operate on feature maps");
        skip_stack.push_back(s);
        break;
      case LayerSpec::Kind::add_skip: {
        if (skip_stack.empty()) fail("add_skip without matching save_skip");
        const ShapeState& t = skip_stack.back();
        if (s.flat || s.c != t.c || s.h != t.h || s.w != t.w)
          fail("skip shapes do not match");
        skip_stack.pop_back();
        break;
      }
    }
  }
  if (head_count != 1) throw std::invalid_argument("model must end in exactly one head layer");
  if (!skip_stack.empty()) throw std::invalid_argument("unbalanced save_skip/add_skip");

  const LayerSpec& head = layers.back();
  if (detector) {
    if (head.out_features != 1 || !head.sigmoid_head)
      throw std::invalid_argument("detector head must be a single sigmoid unit");
  } else {
    if (head.out_features != cfg.num_classes || head.sigmoid_head)
      throw std::invalid_argument("classifier head must emit num_classes logits");
  }
  return plan;
}

// --- little-endian byte IO -------------------------------------------------

void put_u16(std::string& out, uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  const uint64_t bits = std::bit_cast<uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(char((bits >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& data;
  size_t pos = 0;

  void need(size_t n, const char* what) {
    if (pos + n > data.size())
      throw TruncationError(std::string("checkpoint truncated while reading ") + what);
  }
  uint8_t u8(const char* what) {
    need(1, what);
    return uint8_t(data[pos++]);
  }
  uint16_t u16(const char* what) {
    need(2, what);
    uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= uint16_t(uint8_t(data[pos + i])) << (8 * i);
    pos += 2;
    return v;
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(data[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= uint64_t(uint8_t(data[pos + i])) << (8 * i);
    pos += 8;
    return std::bit_cast<double>(bits);
  }
  std::string bytes(size_t n, const char* what) {
    need(n, what);
    std::string s = data.substr(pos, n);
    pos += n;
    return s;
  }
};

// --- architecture entry ----------------------------------------------------

std::string encode_layer(const LayerSpec& L) {
  std::ostringstream os;
  switch (L.kind) {
    case LayerSpec::Kind::conv:
      os << "conv:" << L.out_channels << ':' << L.kernel << ':' << L.stride << ':' << L.pad;
      break;
    case LayerSpec::Kind::relu: os << "relu"; break;
    case LayerSpec::Kind::pool: os << "pool"; break;
    case LayerSpec::Kind::flatten: os << "flat"; break;
    case LayerSpec::Kind::dense: os << "dense:" << L.out_features; break;
    case LayerSpec::Kind::head:
      os << "head:" << L.out_features << ':' << (L.sigmoid_head ? 1 : 0);
      break;
    case LayerSpec::Kind::save_skip: os << "save"; break;
    case LayerSpec::Kind::add_skip: os << "add"; break;
  }
  return os.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  parts.push_back(cur);
  return parts;
}

int parse_int(const std::string& s) {
  if (s.empty()) throw CheckpointError("malformed architecture entry (empty number)");
  size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    throw CheckpointError("malformed architecture entry (bad number '" + s + "')");
  }
  if (used != s.size())
    throw CheckpointError("malformed architecture entry (bad number '" + s + "')");
  return v;
}

LayerSpec decode_layer(const std::string& s) {
  const auto parts = split(s, ':');
  const std::string& k = parts[0];
  auto want = [&](size_t n) {
    if (parts.size() != n)
      throw CheckpointError("malformed architecture entry (layer '" + s + "')");
  };
  if (k == "conv") {
    want(5);
    return LayerSpec::conv(parse_int(parts[1]), parse_int(parts[2]), parse_int(parts[3]),
                           parse_int(parts[4]));
  }
  if (k == "relu") { want(1); return LayerSpec::relu(); }
  if (k == "pool") { want(1); return LayerSpec::pool(); }
  if (k == "flat") { want(1); return LayerSpec::flatten(); }
  if (k == "dense") { want(2); return LayerSpec::dense(parse_int(parts[1])); }
  if (k == "head") {
    want(3);
    return LayerSpec::head(parse_int(parts[1]), parse_int(parts[2]) != 0);
  }
  if (k == "save") { want(1); return LayerSpec::save_skip(); }
  if (k == "add") { want(1); return LayerSpec::add_skip(); }
  throw CheckpointError("malformed architecture entry (unknown layer '" + k + "')");
}

std::string encode_arch(const Model& m) {
  std::ostringstream os;
  os << (m.is_detector() ? 1 : 0) << '|' << m.arch().arch << '|' << m.arch().in_channels << '|'
     << m.arch().height << '|' << m.arch().width << '|' << m.arch().num_classes << '|';
  const auto& layers = m.layers();
  for (size_t i = 0; i < layers.size(); ++i) {
    if (i) os << ';';
    os << encode_layer(layers[i]);
  }
  return os.str();
}

void decode_arch(const std::string& s, std::vector<LayerSpec>& layers, ArchConfig& cfg,
                 bool& detector) {
  const auto fields = split(s, '|');
  if (fields.size() != 7) throw CheckpointError("malformed architecture entry");
  detector = parse_int(fields[0]) != 0;
  cfg.arch = fields[1];
  cfg.in_channels = parse_int(fields[2]);
  cfg.height = parse_int(fields[3]);
  cfg.width = parse_int(fields[4]);
  cfg.num_classes = parse_int(fields[5]);
  layers.clear();
  for (const std::string& part : split(fields[6], ';')) layers.push_back(decode_layer(part));
}

}  // namespace

std::string checkpoint_bytes(const Model& m) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  const auto& params = m.named_params();
  put_u32(out, uint32_t(params.size() + 1));

  // Reserved first entry: the architecture string, one byte per value.
  const std::string arch = encode_arch(m);
  put_u16(out, uint16_t(std::strlen(kArchEntry)));
  out += kArchEntry;
  out.push_back(char(1));  // rank
  put_u32(out, uint32_t(arch.size()));
  for (unsigned char ch : arch) put_f64(out, double(ch));

  for (const auto& [name, t] : params) {
    if (name.size() > 0xffff) throw CheckpointError("parameter name too long: " + name);
    put_u16(out, uint16_t(name.size()));
    out += name;
    out.push_back(char(t.rank()));
    for (int d : t.shape()) put_u32(out, uint32_t(d));
    for (double v : t.values()) put_f64(out, v);
  }
  return out;
}

LayerSpec LayerSpec::conv(int out_channels, int kernel, int stride, int pad) {
  LayerSpec L;
  L.kind = Kind::conv;
  L.out_channels = out_channels;
  L.kernel = kernel;
  L.stride = stride;
  L.pad = pad;
  return L;
}
LayerSpec LayerSpec::relu() { return LayerSpec{.kind = Kind::relu}; }
LayerSpec LayerSpec::pool() { return LayerSpec{.kind = Kind::pool}; }
LayerSpec LayerSpec::flatten() { return LayerSpec{.kind = Kind::flatten}; }
LayerSpec LayerSpec::dense(int out_features) {
  LayerSpec L;
  L.kind = Kind::dense;
  L.out_features = out_features;
  return L;
}
LayerSpec LayerSpec::head(int out_features, bool sigmoid) {
  LayerSpec L;
  L.kind = Kind::head;
  L.out_features = out_features;
  L.sigmoid_head = sigmoid;
  return L;
}
LayerSpec LayerSpec::save_skip() { return LayerSpec{.kind = Kind::save_skip}; }
LayerSpec LayerSpec::add_skip() { return LayerSpec{.kind = Kind::add_skip}; }

Model::Model(std::vector<LayerSpec> layers, ArchConfig cfg, bool detector, uint64_t seed)
    : layers_(std::move(layers)), arch_(std::move(cfg)), detector_(detector) {
  const auto plan = plan_params(layers_, arch_, detector_);
  Rng rng(derive_seed(seed, "model-init"));
  for (const ParamPlan& p : plan) {
    std::vector<double> vals(size_t(shape_numel(p.shape)), 0.0);
    if (p.fan_in > 0) {
      const double bound = std::sqrt(6.0 / double(p.fan_in));
      for (double& v : vals) v = rng.uniform(-bound, bound);
    }
    Tensor t(p.shape, std::move(vals));
    t.set_requires_grad(true);
    params_.emplace_back(p.name, t);
  }
}

Model Model::from_parts(std::vector<LayerSpec> layers, ArchConfig cfg, bool detector,
                        const std::vector<std::pair<std::string, Tensor>>& params) {
  Model m;
  m.layers_ = std::move(layers);
  m.arch_ = std::move(cfg);
  m.detector_ = detector;
  const auto plan = plan_params(m.layers_, m.arch_, m.detector_);
  if (params.size() != plan.size())
    throw CheckpointError("checkpoint holds " + std::to_string(params.size()) +
                          " parameters, architecture needs " + std::to_string(plan.size()));
  for (size_t i = 0; i < plan.size(); ++i) {
    if (params[i].first != plan[i].name)
      throw CheckpointError("unexpected parameter '" + params[i].first + "' (wanted '" +
                            plan[i].name + "')");
    if (params[i].second.shape() != plan[i].shape)
      throw CheckpointError("parameter '" + plan[i].name + "' has shape " +
                            shape_str(params[i].second.shape()) + ", architecture needs " +
                            shape_str(plan[i].shape));
    // Deep copy: two models must never share parameter storage.
    Tensor t = params[i].second.clone_values();
    t.set_requires_grad(true);
    m.params_.emplace_back(plan[i].name, t);
  }
  return m;
}

Tensor Model::forward(Tape& tape, const Tensor& x, std::vector<Tensor>* relu_taps) const {
  if (x.rank() != 4)
    throw std::invalid_argument("model input must be [B,C,H,W], got " + shape_str(x.shape()));
  if (x.dim(1) != arch_.in_channels || x.dim(2) != arch_.height || x.dim(3) != arch_.width)
    throw std::invalid_argument("model input " + shape_str(x.shape()) + " does not match [B," +
                                std::to_string(arch_.in_channels) + "," +
                                std::to_string(arch_.height) + "," +
                                std::to_string(arch_.width) + "]");
  Tensor cur = x;
  std::vector<Tensor> skips;
  size_t pi = 0;
  for (const LayerSpec& L : layers_) {
    switch (L.kind) {
      case LayerSpec::Kind::conv: {
        const Tensor& w = params_[pi].second;
        const Tensor& b = params_[pi + 1].second;
        pi += 2;
        cur = conv2d(tape, cur, w, L.stride, L.pad);
        cur = add_bias_channels(tape, cur, b);
        break;
      }
      case LayerSpec::Kind::relu:
        cur = relu(tape, cur);
        if (relu_taps) relu_taps->push_back(cur);
        break;
      case LayerSpec::Kind::pool:
        cur = mean_pool2(tape, cur);
        break;
      case LayerSpec::Kind::flatten:
        cur = flatten(tape, cur);
        break;
      case LayerSpec::Kind::dense:
      case LayerSpec::Kind::head: {
        const Tensor& w = params_[pi].second;
        const Tensor& b = params_[pi + 1].second;
        pi += 2;
        cur = matmul(tape, cur, w);
        cur = add_bias_rows(tape, cur, b);
        if (L.kind == LayerSpec::Kind::head && L.sigmoid_head) cur = sigmoid(tape, cur);
        break;
      }
      case LayerSpec::Kind::save_skip:
        skips.push_back(cur);
        break;
      case LayerSpec::Kind::add_skip:
        cur = add(tape, cur, skips.back());
        skips.pop_back();
        break;
    }
  }
  return cur;
}

void Model::set_mode(Mode m) {
  mode_ = m;
  const bool rg = (m == Mode::train);
  for (auto& [name, t] : params_) t.set_requires_grad(rg);
}

std::vector<Tensor> Model::params() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& [name, t] : params_) out.push_back(t);
  return out;
}

Tensor Model::param(const std::string& name) const {
  for (const auto& [n, t] : params_)
    if (n == name) return t;
  throw std::invalid_argument("no parameter named '" + name + "'");
}

int64_t Model::param_count() const {
  int64_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

void Model::zero_param_grads() const {
  for (const auto& [name, t] : params_) t.clear_grad();
}

std::vector<LayerSpec> make_arch_layers(const std::string& name, int head_features,
                                        bool sigmoid_head) {
  std::vector<LayerSpec> L;
  if (name == "cnn-small") {
    L = {LayerSpec::conv(16, 3, 1, 1), LayerSpec::relu(),  LayerSpec::pool(),
         LayerSpec::conv(32, 3, 1, 1), LayerSpec::relu(),  LayerSpec::pool(),
         LayerSpec::flatten(),         LayerSpec::dense(128), LayerSpec::relu()};
  } else if (name == "cnn-res") {
    L = {LayerSpec::conv(16, 3, 1, 1), LayerSpec::relu(),      LayerSpec::pool(),
         LayerSpec::save_skip(),       LayerSpec::conv(16, 3, 1, 1), LayerSpec::relu(),
         LayerSpec::conv(16, 3, 1, 1), LayerSpec::add_skip(),  LayerSpec::relu(),
         LayerSpec::pool(),            LayerSpec::flatten(),   LayerSpec::dense(128),
         LayerSpec::relu()};
  } else {
    throw std::invalid_argument("unknown architecture '" + name + "'");
  }
  L.push_back(LayerSpec::head(head_features, sigmoid_head));
  return L;
}

Model build_classifier(const ArchConfig& cfg, uint64_t seed) {
  return Model(make_arch_layers(cfg.arch, cfg.num_classes, false), cfg, false, seed);
}

Model build_detector(const ArchConfig& cfg, uint64_t seed) {
  return Model(make_arch_layers(cfg.arch, 1, true), cfg, true, seed);
}

Tensor predict(Tape& tape, const Model& f, const Tensor& x) {
  if (f.is_detector()) throw std::invalid_argument("predict expects a classifier model");
  return f.forward(tape, x);
}

Tensor detect(Tape& tape, const Model& g, const Tensor& x) {
  if (!g.is_detector()) throw std::invalid_argument("detect expects a detector model");
  return g.forward(tape, x);
}

std::vector<int> predict_labels(const Model& f, const Tensor& x) {
  Tape tape;
  return argmax_rows(predict(tape, f, x));
}

std::vector<double> detect_scores(const Model& g, const Tensor& x) {
  Tape tape;
  return detect(tape, g, x).values();
}

void save_checkpoint(const Model& model, const std::string& path) {
  const std::string bytes = checkpoint_bytes(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path);
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw CheckpointError("failed to write checkpoint: " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Reader r{data};
  const std::string magic = r.bytes(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0)
    throw BadMagicError("not a checkpoint file (bad magic): " + path);
  const uint32_t version = r.u32("version");
  if (version != kVersion)
    throw VersionMismatchError("unsupported checkpoint version " + std::to_string(version) +
                               " (expected " + std::to_string(kVersion) + ")");
  const uint32_t count = r.u32("tensor count");
  if (count < 1) throw CheckpointError("checkpoint holds no tensors");

  std::vector<LayerSpec> layers;
  ArchConfig cfg;
  bool detector = false;
  std::vector<std::pair<std::string, Tensor>> params;

  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t name_len = r.u16("name length");
    const std::string name = r.bytes(name_len, "name");
    const uint8_t rank = r.u8("rank");
    Shape shape(rank);
    int64_t numel = 1;
    for (uint8_t d = 0; d < rank; ++d) {
      const uint32_t dim = r.u32("dimension");
      if (dim == 0 || dim > (1u << 30)) throw CheckpointError("bad tensor dimension in " + name);
      shape[d] = int(dim);
      numel *= dim;
    }
    std::vector<double> vals(static_cast<size_t>(numel));
    for (int64_t k = 0; k < numel; ++k) vals[size_t(k)] = r.f64("values");

    if (i == 0) {
      if (name != kArchEntry)
        throw CheckpointError("checkpoint is missing its architecture entry");
      std::string arch_str;
      arch_str.reserve(vals.size());
      for (double v : vals) {
        if (v < 0.0 || v > 255.0 || v != std::floor(v))
          throw CheckpointError("malformed architecture entry");
        arch_str.push_back(char(uint8_t(v)));
      }
      decode_arch(arch_str, layers, cfg, detector);
    } else {
      params.emplace_back(name, Tensor(shape, std::move(vals)));
    }
  }
  if (r.pos != data.size()) throw CheckpointError("trailing bytes after checkpoint payload");
  return Model::from_parts(std::move(layers), std::move(cfg), detector, params);
}

bool models_bitwise_equal(const Model& a, const Model& b) {
  return checkpoint_bytes(a) == checkpoint_bytes(b);
}

}  // namespace radar
