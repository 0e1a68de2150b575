// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/experiment/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "seqforce/errors.hpp"

namespace seqforce::experiment {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void bytes(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  std::vector<unsigned char> take() { return std::move(out_); }

 private:
  std::vector<unsigned char> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::size_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw DataError("checkpoint truncated at byte " + std::to_string(pos_));
  }

  std::span<const unsigned char> in_;
  std::size_t pos_ = 0;
};

void add_arrays(std::vector<NamedArray>& out, const std::string& prefix,
                const std::vector<std::pair<std::string, const ad::Tensor*>>& named) {
  for (const auto& [name, t] : named) out.push_back({prefix + name, t->shape(), t->storage()});
}

void add_moments(std::vector<NamedArray>& out, const std::string& prefix,
                 const std::vector<std::pair<std::string, const ad::Tensor*>>& named,
                 const std::vector<std::vector<double>>& moments) {
  if (moments.size() != named.size()) throw ContractError("optimizer state does not match the parameters");
  for (std::size_t i = 0; i < named.size(); ++i) {
    out.push_back({prefix + named[i].first, named[i].second->shape(), moments[i]});
  }
}

}  // namespace

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(ckpt.version);
  w.u64(ckpt.config_digest);
  w.u64(ckpt.step);
  w.str(ckpt.model_id);
  w.str(ckpt.config);
  w.u64(ckpt.adam_steps);
  w.u8(ckpt.has_discriminator ? 1 : 0);
  w.u64(ckpt.discriminator_adam_steps);
  w.u32(static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const auto& a : ckpt.arrays) {
    std::size_t n = 1;
    for (auto d : a.shape) n *= d;
    if (n != a.values.size()) throw ContractError("checkpoint array " + a.name + " does not match its shape");
    w.str(a.name);
    w.u32(static_cast<std::uint32_t>(a.shape.size()));
    for (auto d : a.shape) w.u64(d);
    for (double v : a.values) w.f64(v);
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const unsigned char> bytes) {
  if (bytes.size() < sizeof kCheckpointMagic ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    throw DataError("not a seqforce checkpoint (bad magic)");
  }
  Reader r(bytes.subspan(sizeof kCheckpointMagic));
  Checkpoint c;
  c.version = r.u32();
  if (c.version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(c.version) + " (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  c.config_digest = r.u64();
  c.step = r.u64();
  c.model_id = r.str();
  c.config = r.str();
  c.adam_steps = r.u64();
  c.has_discriminator = r.u8() != 0;
  c.discriminator_adam_steps = r.u64();
  const std::size_t count = r.u32();
  for (std::size_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.str();
    const std::size_t rank = r.u32();
    std::size_t n = 1;
    for (std::size_t d = 0; d < rank; ++d) {
      a.shape.push_back(static_cast<std::size_t>(r.u64()));
      n *= a.shape.back();
    }
    if (n > bytes.size() / 8) throw DataError("checkpoint array " + a.name + " is larger than the file");
    a.values.resize(n);
    for (auto& v : a.values) v = r.f64();
    c.arrays.push_back(std::move(a));
  }
  if (!r.done()) throw DataError("checkpoint has trailing bytes");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return decode_checkpoint(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Checkpoint make_checkpoint(const regimes::TrainState& state, const RunConfig& config, std::string model_id) {
  Checkpoint c;
  c.config_digest = config_digest(config);
  c.step = state.step;
  c.model_id = std::move(model_id);
  c.config = dump_run_config(config);
  c.adam_steps = state.adam.t;
  const auto named = state.params.named();
  add_arrays(c.arrays, "param/", named);
  add_moments(c.arrays, "adam.m/", named, state.adam.m);
  add_moments(c.arrays, "adam.v/", named, state.adam.v);
  if (state.discriminator) {
    if (!state.discriminator_adam) throw ContractError("discriminator without optimizer state");
    c.has_discriminator = true;
    c.discriminator_adam_steps = state.discriminator_adam->t;
    const auto dn = state.discriminator->named();
    add_arrays(c.arrays, "disc/", dn);
    add_moments(c.arrays, "disc_adam.m/", dn, state.discriminator_adam->m);
    add_moments(c.arrays, "disc_adam.v/", dn, state.discriminator_adam->v);
  }
  return c;
}

Restored restore(const Checkpoint& ckpt) {
  std::istringstream text(ckpt.config);
  RunConfig config = parse_run_config(text);
  if (config_digest(config) != ckpt.config_digest) {
    throw DataError("checkpoint config text does not match its digest");
  }
  auto state = regimes::TrainState::fresh(model::ModelParams::init(config.model_config(), 0), config.regime, 0);
  if (state.discriminator.has_value() != ckpt.has_discriminator) {
    throw DataError("checkpoint discriminator presence does not match regime " +
                    std::string(regimes::regime_name(config.regime)));
  }
  state.step = ckpt.step;
  state.adam.t = ckpt.adam_steps;

  // Every expected slot, keyed by full array name.
  struct Slot {
    ad::Shape shape;
    std::vector<double>* values;
  };
  std::map<std::string, Slot> slots;
  auto expose = [&](const std::string& prefix, auto named, regimes::AdamState& adam) {
    for (std::size_t i = 0; i < named.size(); ++i) {
      auto& [name, t] = named[i];
      slots[prefix + name] = {t->shape(), nullptr};
      const std::string opt = prefix == "param/" ? "adam" : "disc_adam";
      slots[opt + ".m/" + name] = {t->shape(), &adam.m[i]};
      slots[opt + ".v/" + name] = {t->shape(), &adam.v[i]};
    }
  };
  auto params = state.params.named();
  expose("param/", params, state.adam);
  std::vector<std::pair<std::string, ad::Tensor*>> disc;
  if (state.discriminator) {
    state.discriminator_adam->t = ckpt.discriminator_adam_steps;
    disc = state.discriminator->named();
    expose("disc/", disc, *state.discriminator_adam);
  }
  std::map<std::string, ad::Tensor*> tensors;
  for (auto& [name, t] : params) tensors["param/" + name] = t;
  for (auto& [name, t] : disc) tensors["disc/" + name] = t;

  for (const auto& a : ckpt.arrays) {
    const auto it = slots.find(a.name);
    if (it == slots.end()) throw DataError("checkpoint has unexpected array " + a.name);
    if (it->second.shape != a.shape) {
      throw DataError("checkpoint array " + a.name + " has shape " + ad::to_string(a.shape) + ", expected " +
                      ad::to_string(it->second.shape));
    }
    if (it->second.values != nullptr) {
      *it->second.values = a.values;
    } else {
      *tensors.at(a.name) = ad::Tensor(a.shape, a.values);
    }
    slots.erase(it);
  }
  if (!slots.empty()) throw DataError("checkpoint is missing array " + slots.begin()->first);
  return {std::move(config), std::move(state)};
}

void require_same_config(const Checkpoint& ckpt, const RunConfig& config) {
  const auto digest = config_digest(config);
  if (digest != ckpt.config_digest) {
    std::ostringstream msg;
    msg << "refusing to resume: checkpoint config digest " << std::hex << ckpt.config_digest
        << " differs from the current config digest " << digest
        << "; the run settings changed since the checkpoint was written";
    throw ContractError(msg.str());
  }
}

}  // namespace seqforce::experiment
