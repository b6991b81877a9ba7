#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "navlab/numerics.hpp"

namespace navlab {

/// How concurrent workers touch the shared parameters.
///  Serialized: one mutex around every whole snapshot and every whole update.
///  Hogwild: each block is locked only while it is copied or updated, so a
///  worker may see some blocks from before and some from after another
///  worker's update.
enum class UpdateMode { Serialized, Hogwild };

std::string to_string(UpdateMode mode);
UpdateMode parse_update_mode(const std::string& text);

using BlockId = std::size_t;

/// Shared parameter store plus one shared RMSProp state for every block.
/// Blocks may be added while workers run; ids and storage stay stable.
class ParamStore {
 public:
  ParamStore(UpdateMode mode, RmsPropConfig config);
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;

  UpdateMode mode() const { return mode_; }
  const RmsPropConfig& optimizer_config() const { return config_; }

  /// Adds a block under its name. Throws if the name is taken.
  BlockId add(ParamBlock block);
  std::optional<BlockId> find(const std::string& name) const;
  /// Returns the existing id for the name, or adds the block produced by make().
  template <typename Make>
  BlockId find_or_add(const std::string& name, Make&& make);

  std::size_t block_count() const;

  /// Copies current values of the given blocks into out (shapes must match
  /// or out is resized).
  void snapshot(std::span<const BlockId> ids, std::span<ParamBlock* const> out) const;

  /// One RMSProp step per block; grads are zeroed afterwards. Blocks whose
  /// gradient holds non-finite entries are skipped and counted.
  void apply(std::span<const BlockId> ids, std::span<GradBlock* const> grads);

  /// Locked copy of one block.
  ParamBlock copy(BlockId id) const;

  /// Unsynchronized access. Only valid while no worker is running.
  ParamBlock& block(BlockId id);
  const ParamBlock& block(BlockId id) const;
  const RmsAccumulator& accumulator(BlockId id) const;

  std::size_t rejected_updates() const { return rejected_.load(); }
  std::size_t applied_updates() const { return applied_.load(); }

 private:
  struct Slot {
    ParamBlock params;
    RmsAccumulator v;
    mutable std::mutex mu;
  };

  Slot& slot(BlockId id) const;

  UpdateMode mode_;
  RmsPropConfig config_;
  mutable std::shared_mutex registry_mu_;
  std::vector<std::unique_ptr<Slot>> slots_;
  mutable std::mutex serial_mu_;
  std::atomic<std::size_t> rejected_{0};
  std::atomic<std::size_t> applied_{0};
};

template <typename Make>
BlockId ParamStore::find_or_add(const std::string& name, Make&& make) {
  {
    std::shared_lock lock(registry_mu_);
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      if (slots_[i]->params.name == name) return i;
    }
  }
  std::unique_lock lock(registry_mu_);
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i]->params.name == name) return i;
  }
  auto s = std::make_unique<Slot>();
  s->params = make();
  s->params.name = name;
  s->v = RmsAccumulator(s->params);
  slots_.push_back(std::move(s));
  return slots_.size() - 1;
}

}  // namespace navlab
