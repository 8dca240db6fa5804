// The cognitive map: a persistent registry of pose-tagged latents in the
// global frame. Query retrieves the in-view subset (top-K by presence logit,
// prior-padded) transformed into the camera frame; registration transforms
// refined slots back and drops those deemed non-existent. Entries never
// touched by a query/register cycle are left bit-identical.
//
// The container is generic over its parameter payload so a training run can
// store live autodiff values while an inference run stores plain numbers.

#pragma once

#include "ocs/geometry.hpp"
#include "ocs/latents.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ocs {

enum class EntryKind { object, layout };

template <class Params>
struct BasicMapEntry {
  std::int64_t id = 0;
  EntryKind kind = EntryKind::object;
  Params params;  // mu_where in the GLOBAL frame
  std::string decoder_ref;  // optional per-entry decoder checkpoint
  std::int64_t last_update_step = 0;
  int tile_ix = 0, tile_iz = 0;  // layout entries only

  double presence_prob() const {
    return kind == EntryKind::layout ? 1.0 : params.presence_prob();
  }
  double presence_logit() const {
    return kind == EntryKind::layout ? std::numeric_limits<double>::infinity()
                                     : params.logit_pres.scalar();
  }
};

template <class Params>
struct QueryResult {
  std::vector<Params> slots;                     // size K, camera frame
  std::vector<std::optional<std::int64_t>> slot_ids;  // nullopt = fresh
  Params layout;                                 // camera frame
  std::int64_t layout_id = 0;
};

template <class Params>
bool entry_in_view(const BasicMapEntry<Params>& entry, const CameraPose& camera,
                   double margin) {
  const auto& w = entry.params.mu_where.value();
  return ground_point_in_view(camera, w(0, 0), w(0, 1), margin);
}

template <class Params>
class BasicCognitiveMap {
 public:
  using Entry = BasicMapEntry<Params>;
  // builds a fresh layout payload for a tile centered at the given pose
  using LayoutFactory = std::function<Params(const GroundPose&)>;

  double layout_tile_size = 8.0;
  double in_view_margin = 0.5;

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  std::int64_t next_id() const { return next_id_; }
  void set_next_id(std::int64_t id) { next_id_ = id; }

  Entry* find(std::int64_t id) {
    for (auto& e : entries_)
      if (e.id == id) return &e;
    return nullptr;
  }
  const Entry* find(std::int64_t id) const {
    return const_cast<BasicCognitiveMap*>(this)->find(id);
  }

  std::pair<int, int> tile_of(double x, double z) const {
    return {static_cast<int>(std::floor(x / layout_tile_size)),
            static_cast<int>(std::floor(z / layout_tile_size))};
  }
  GroundPose tile_center(int ix, int iz) const {
    return GroundPose{(ix + 0.5) * layout_tile_size, (iz + 0.5) * layout_tile_size, 0.0};
  }

  // creates the camera's layout tile on first touch
  QueryResult<Params> query(const CameraPose& camera, int K, const Params& pad,
                            const LayoutFactory& fresh_layout) {
    if (K < 1) throw std::invalid_argument("cogmap: K must be >= 1");
    QueryResult<Params> out;
    GroundPose cam_ground = camera_ground_pose(camera);

    std::vector<const Entry*> in_view;
    for (const auto& e : entries_)
      if (e.kind == EntryKind::object && entry_in_view(e, camera, in_view_margin))
        in_view.push_back(&e);
    std::stable_sort(in_view.begin(), in_view.end(),
                     [](const Entry* a, const Entry* b) {
                       return a->presence_logit() > b->presence_logit();
                     });
    if (static_cast<int>(in_view.size()) > K) in_view.resize(static_cast<size_t>(K));

    for (const Entry* e : in_view) {
      out.slots.push_back(e->params.transformed(cam_ground, FrameDir::to_camera));
      out.slot_ids.push_back(e->id);
    }
    while (static_cast<int>(out.slots.size()) < K) {
      out.slots.push_back(pad);
      out.slot_ids.push_back(std::nullopt);
    }

    auto [ix, iz] = tile_of(camera.position.x(), camera.position.z());
    Entry* tile = find_tile(ix, iz);
    if (!tile) {
      Entry e;
      e.id = next_id_++;
      e.kind = EntryKind::layout;
      e.tile_ix = ix;
      e.tile_iz = iz;
      e.params = fresh_layout(tile_center(ix, iz));
      entries_.push_back(std::move(e));
      tile = &entries_.back();
    }
    out.layout = tile->params.transformed(cam_ground, FrameDir::to_camera);
    out.layout_id = tile->id;
    return out;
  }

  // slots/slot_ids must come from a query against the same camera. Slots with
  // presence probability below 0.5 are discarded; existing entries falling
  // below the threshold are deleted.
  void register_slots(const std::vector<Params>& slots,
                      const std::vector<std::optional<std::int64_t>>& slot_ids,
                      const Params& layout, std::int64_t layout_id,
                      const CameraPose& camera, std::int64_t step) {
    if (slots.size() != slot_ids.size())
      throw std::invalid_argument("cogmap: slot/slot_id length mismatch");
    GroundPose cam_ground = camera_ground_pose(camera);
    for (size_t i = 0; i < slots.size(); ++i) {
      bool present = slots[i].presence_prob() >= 0.5;
      if (slot_ids[i]) {
        auto it = std::find_if(entries_.begin(), entries_.end(),
                               [&](const Entry& e) { return e.id == *slot_ids[i]; });
        if (it == entries_.end()) throw std::invalid_argument("cogmap: unknown slot id");
        if (!present) {
          entries_.erase(it);
        } else {
          it->params = slots[i].transformed(cam_ground, FrameDir::to_global);
          it->last_update_step = step;
        }
      } else if (present) {
        Entry e;
        e.id = next_id_++;
        e.kind = EntryKind::object;
        e.params = slots[i].transformed(cam_ground, FrameDir::to_global);
        e.last_update_step = step;
        entries_.push_back(std::move(e));
      }
    }
    Entry* tile = find(layout_id);
    if (!tile || tile->kind != EntryKind::layout)
      throw std::invalid_argument("cogmap: bad layout id");
    // the tile pose and presence are fixed; only the appearance updates
    Params updated = layout.transformed(cam_ground, FrameDir::to_global);
    updated.mu_where = tile->params.mu_where;
    updated.log_sigma_where = tile->params.log_sigma_where;
    updated.logit_pres = tile->params.logit_pres;
    tile->params = std::move(updated);
    tile->last_update_step = step;
  }

  // drops autodiff history from every stored payload (e.g. at episode end)
  void detach_all() {
    for (auto& e : entries_) e.params = e.params.detached();
  }

  size_t object_count() const {
    size_t n = 0;
    for (const auto& e : entries_)
      if (e.kind == EntryKind::object) ++n;
    return n;
  }

 private:
  Entry* find_tile(int ix, int iz) {
    for (auto& e : entries_)
      if (e.kind == EntryKind::layout && e.tile_ix == ix && e.tile_iz == iz) return &e;
    return nullptr;
  }

  std::vector<Entry> entries_;
  std::int64_t next_id_ = 1;
};

using MapEntry = BasicMapEntry<LatentParams>;
using CognitiveMap = BasicCognitiveMap<LatentParams>;

// versioned record file; doubles round-trip bit-exactly
void save_map(const CognitiveMap& map, const std::filesystem::path& path);
CognitiveMap load_map(const std::filesystem::path& path);

}  // namespace ocs
