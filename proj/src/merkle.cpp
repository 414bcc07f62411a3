#include "hearth/merkle.hpp"

#include "hearth/primitives.hpp"

namespace hearth::merkle {

namespace {

Digest256 node(const Digest256& left, const Digest256& right) {
  return hash(concat({left.view(), right.view()}));
}

}  // namespace

std::vector<std::vector<Digest256>> MerkleTree::build_levels(std::span<const Digest256> leaves) {
  if (leaves.empty()) throw Error(Errc::EmptyTree);
  std::vector<std::vector<Digest256>> levels;
  levels.emplace_back(leaves.begin(), leaves.end());
  while (levels.back().size() > 1) {
    const auto& below = levels.back();
    std::vector<Digest256> above;
    above.reserve((below.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < below.size(); i += 2) above.push_back(node(below[i], below[i + 1]));
    if (below.size() % 2 == 1) above.push_back(below.back());
    levels.push_back(std::move(above));
  }
  return levels;
}

MerkleTree::MerkleTree(std::vector<Digest256> leaves) : levels_(build_levels(leaves)) {}

void MerkleTree::append(const Digest256& leaf) {
  std::vector<Digest256> leaves = levels_.empty() ? std::vector<Digest256>{} : levels_.front();
  leaves.push_back(leaf);
  levels_ = build_levels(leaves);
}

const Digest256& MerkleTree::root() const {
  if (levels_.empty()) throw Error(Errc::EmptyTree);
  return levels_.back().front();
}

Digest256 MerkleTree::root_at(std::size_t leaf_count) const {
  if (leaf_count == 0) throw Error(Errc::EmptyTree);
  if (leaf_count > size()) throw Error(Errc::IndexOutOfRange);
  if (leaf_count == size()) return root();
  return build_root(std::span(levels_.front()).first(leaf_count));
}

const std::vector<Digest256>& MerkleTree::leaves() const {
  static const std::vector<Digest256> kNone;
  return levels_.empty() ? kNone : levels_.front();
}

MerkleProof MerkleTree::prove(std::size_t index) const {
  if (index >= size()) throw Error(Errc::IndexOutOfRange);
  MerkleProof proof;
  proof.leaf_index = index;
  std::size_t pos = index;
  for (std::size_t level = 0; level + 1 < levels_.size(); ++level) {
    const auto& row = levels_[level];
    if (pos % 2 == 1) {
      proof.siblings.push_back({row[pos - 1], Side::Left});
    } else if (pos + 1 < row.size()) {
      proof.siblings.push_back({row[pos + 1], Side::Right});
    }
    pos /= 2;
  }
  return proof;
}

bool MerkleTree::consistent() const {
  if (levels_.empty()) return true;
  return build_levels(levels_.front()) == levels_;
}

Digest256 build_root(std::span<const Digest256> leaves) {
  if (leaves.empty()) throw Error(Errc::EmptyTree);
  std::vector<Digest256> row(leaves.begin(), leaves.end());
  while (row.size() > 1) {
    std::vector<Digest256> above;
    for (std::size_t i = 0; i + 1 < row.size(); i += 2) above.push_back(node(row[i], row[i + 1]));
    if (row.size() % 2 == 1) above.push_back(row.back());
    row = std::move(above);
  }
  return row.front();
}

bool verify(const Digest256& root, const Digest256& leaf, const MerkleProof& proof) {
  Digest256 acc = leaf;
  for (const auto& s : proof.siblings) acc = s.side == Side::Left ? node(s.digest, acc) : node(acc, s.digest);
  return acc == root;
}

void encode(WireWriter& w, const MerkleProof& proof) {
  w.u64(proof.leaf_index);
  w.u16(static_cast<std::uint16_t>(proof.siblings.size()));
  for (const auto& s : proof.siblings) w.u8(static_cast<std::uint8_t>(s.side)).fixed(s.digest);
}

MerkleProof decode_proof(WireReader& r) {
  MerkleProof proof;
  proof.leaf_index = r.u64();
  const auto count = r.u16();
  proof.siblings.reserve(count);
  for (std::uint16_t i = 0; i < count; ++i) {
    const auto side = r.u8();
    if (side > 1) throw Error(Errc::Malformed, "sibling side");
    proof.siblings.push_back({r.fixed<Digest256>(), static_cast<Side>(side)});
  }
  return proof;
}

std::size_t encoded_size(const MerkleProof& proof) noexcept { return 8 + 2 + proof.siblings.size() * 33; }

}  // namespace hearth::merkle
