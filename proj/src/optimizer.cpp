#include "navlab/optimizer.hpp"

namespace navlab {

std::string to_string(UpdateMode mode) { return mode == UpdateMode::Serialized ? "serialized" : "hogwild"; }

UpdateMode parse_update_mode(const std::string& text) {
  if (text == "serialized") return UpdateMode::Serialized;
  if (text == "hogwild") return UpdateMode::Hogwild;
  throw ValidationError("mode must be 'serialized' or 'hogwild', got '" + text + "'");
}

ParamStore::ParamStore(UpdateMode mode, RmsPropConfig config) : mode_(mode), config_(config) {}

BlockId ParamStore::add(ParamBlock block) {
  std::unique_lock lock(registry_mu_);
  for (const auto& s : slots_) {
    if (s->params.name == block.name) throw Error("duplicate parameter block " + block.name);
  }
  auto s = std::make_unique<Slot>();
  s->v = RmsAccumulator(block);
  s->params = std::move(block);
  slots_.push_back(std::move(s));
  return slots_.size() - 1;
}

std::optional<BlockId> ParamStore::find(const std::string& name) const {
  std::shared_lock lock(registry_mu_);
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i]->params.name == name) return i;
  }
  return std::nullopt;
}

std::size_t ParamStore::block_count() const {
  std::shared_lock lock(registry_mu_);
  return slots_.size();
}

ParamStore::Slot& ParamStore::slot(BlockId id) const {
  std::shared_lock lock(registry_mu_);
  if (id >= slots_.size()) throw Error("unknown parameter block id");
  return *slots_[id];
}

void ParamStore::snapshot(std::span<const BlockId> ids, std::span<ParamBlock* const> out) const {
  std::unique_lock<std::mutex> serial;
  if (mode_ == UpdateMode::Serialized) serial = std::unique_lock(serial_mu_);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    Slot& s = slot(ids[i]);
    std::unique_lock<std::mutex> block_lock;
    if (mode_ == UpdateMode::Hogwild) block_lock = std::unique_lock(s.mu);
    ParamBlock& dst = *out[i];
    if (dst.rows != s.params.rows || dst.cols != s.params.cols) {
      dst = s.params;
    } else {
      std::copy(s.params.weights.begin(), s.params.weights.end(), dst.weights.begin());
      std::copy(s.params.bias.begin(), s.params.bias.end(), dst.bias.begin());
    }
  }
}

void ParamStore::apply(std::span<const BlockId> ids, std::span<GradBlock* const> grads) {
  std::unique_lock<std::mutex> serial;
  if (mode_ == UpdateMode::Serialized) serial = std::unique_lock(serial_mu_);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    Slot& s = slot(ids[i]);
    std::unique_lock<std::mutex> block_lock;
    if (mode_ == UpdateMode::Hogwild) block_lock = std::unique_lock(s.mu);
    if (rmsprop_apply(config_, s.v, s.params, *grads[i])) {
      ++applied_;
    } else {
      ++rejected_;
    }
  }
}

ParamBlock ParamStore::copy(BlockId id) const {
  ParamBlock out;
  ParamBlock* dst[] = {&out};
  const BlockId ids[] = {id};
  snapshot(ids, dst);
  return out;
}

ParamBlock& ParamStore::block(BlockId id) { return slot(id).params; }
const ParamBlock& ParamStore::block(BlockId id) const { return slot(id).params; }
const RmsAccumulator& ParamStore::accumulator(BlockId id) const { return slot(id).v; }

}  // namespace navlab
