#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hearth/bytes.hpp"

namespace hearth::merkle {

/// Which side of the running digest a sibling sits on when folding upward.
enum class Side : std::uint8_t { Left = 0, Right = 1 };

struct Sibling {
  Digest256 digest;
  Side side = Side::Left;

  friend bool operator==(const Sibling&, const Sibling&) = default;
};

struct MerkleProof {
  std::uint64_t leaf_index = 0;
  std::vector<Sibling> siblings;

  friend bool operator==(const MerkleProof&, const MerkleProof&) = default;
};

/// Binary hash tree, parent = hash(left || right). A node without a partner
/// is promoted to the next level unchanged, so a single leaf is its own root.
class MerkleTree {
 public:
  MerkleTree() = default;
  /// Throws `Errc::EmptyTree` when `leaves` is empty.
  explicit MerkleTree(std::vector<Digest256> leaves);

  void append(const Digest256& leaf);

  /// Throws `Errc::EmptyTree` on an empty tree.
  const Digest256& root() const;
  /// Root over the first `leaf_count` leaves.
  Digest256 root_at(std::size_t leaf_count) const;
  /// Throws `Errc::IndexOutOfRange` when `index >= size()`.
  MerkleProof prove(std::size_t index) const;

  std::size_t size() const noexcept { return levels_.empty() ? 0 : levels_.front().size(); }
  bool empty() const noexcept { return size() == 0; }
  const std::vector<Digest256>& leaves() const;
  /// Recomputes every level from the leaves and compares with the cache.
  bool consistent() const;

  friend bool operator==(const MerkleTree& a, const MerkleTree& b) { return a.levels_ == b.levels_; }

 private:
  static std::vector<std::vector<Digest256>> build_levels(std::span<const Digest256> leaves);

  std::vector<std::vector<Digest256>> levels_;
};

/// Root of `leaves`; throws `Errc::EmptyTree` when empty.
Digest256 build_root(std::span<const Digest256> leaves);

bool verify(const Digest256& root, const Digest256& leaf, const MerkleProof& proof);

/// leaf_index (u64) || count (u16) || count x (side u8 || digest 32).
void encode(WireWriter& w, const MerkleProof& proof);
MerkleProof decode_proof(WireReader& r);
std::size_t encoded_size(const MerkleProof& proof) noexcept;

}  // namespace hearth::merkle
