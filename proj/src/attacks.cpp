#include "hearth/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace hearth::harness {

AdversaryModel AdversaryModel::network() {
  return {{Capability::RecordReplay, Capability::Inject, Capability::KnowsPublicKeys}};
}

std::string_view to_string(AttackKind k) noexcept {
  switch (k) {
    case AttackKind::Replay: return "replay";
    case AttackKind::Impersonate: return "impersonate";
    case AttackKind::SessionKeyDisclosure: return "skd";
    case AttackKind::StolenDevice: return "stolen";
  }
  return "?";
}

AttackKind parse_attack_kind(std::string_view s) {
  for (auto k : kAllAttacks) {
    if (to_string(k) == s) return k;
  }
  throw Error(Errc::ConfigError, "attack kind: " + std::string(s));
}

namespace {

const TranscriptEvent* find_event(const std::vector<TranscriptEvent>& events, std::string_view label) {
  auto it = std::find_if(events.begin(), events.end(), [&](const auto& e) { return e.label == label; });
  return it == events.end() ? nullptr : &*it;
}

Bytes message_of(const std::vector<TranscriptEvent>& events, std::string_view label) {
  const auto* e = find_event(events, label);
  if (e == nullptr) throw Error(Errc::ScriptError, "transcript lacks " + std::string(label));
  return e->message;
}

/// Runs `step`; true if it returned, false if it threw a protocol error.
template <typename F>
bool completes(F&& step, std::vector<std::string>& rejections) {
  try {
    step();
    return true;
  } catch (const Error& e) {
    rejections.emplace_back(to_string(e.code()));
    return false;
  }
}

std::string summarize(const std::vector<std::string>& rejections) {
  std::map<std::string, int> counts;
  for (const auto& r : rejections) ++counts[r];
  std::ostringstream out;
  bool first = true;
  for (const auto& [code, n] : counts) {
    out << (first ? "" : ", ") << code << " x" << n;
    first = false;
  }
  return out.str();
}

Digest256 random_digest(RandomSource& src) { return src.draw<Digest256>(); }

/// What an eavesdropper can compute about one recorded session.
struct SessionView {
  std::vector<Nonce128> nonces;
  std::string sk_label;
  Bytes sk_salt;
};

std::vector<SessionView> view_sessions(const World& w, const std::vector<RecordedSession>& sessions) {
  std::vector<SessionView> out;
  std::optional<dors::ChainState> chain;
  if (w.scheme == Scheme::Dors) chain = dors::genesis_chain(w.dors_gateway->pub);
  for (const auto& s : sessions) {
    SessionView v;
    switch (w.scheme) {
      case Scheme::Mht: {
        const auto m1 = mht::M1::decode(message_of(s.events, "M1"));
        const auto m2 = mht::M2::decode(message_of(s.events, "M2"));
        v.nonces = {m1.n_u, m2.n_g};
        v.sk_label = "sk";
        v.sk_salt = concat({m1.n_u.view(), m2.n_g.view(), m2.root.view()});
        break;
      }
      case Scheme::Dors: {
        const auto c = dors::ChallengeMessage::decode(message_of(s.events, "CHALLENGE"));
        const auto sig = dors::Signature::decode(message_of(s.events, "SIGNATURE"), w.dors_gateway->pub.params);
        chain = dors::advance(*chain, sig);
        v.nonces = {c.nonce};
        v.sk_label = "dors-sk";
        v.sk_salt = concat({c.nonce.view(), chain->value.view()});
        break;
      }
      case Scheme::Dhs: {
        const auto login = dhs::LoginPayload::decode(dhs::Ipv6Packet::decode(message_of(s.events, "LOGIN")).payload);
        const auto ch = dhs::Challenge::decode(message_of(s.events, "CHALLENGE"));
        v.nonces = {login.n_u, ch.n_e};
        v.sk_label = "dhs-sk";
        v.sk_salt = concat({login.n_u.view(), ch.n_e.view()});
        break;
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

bool contains_bytes(ByteView haystack, ByteView needle) {
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) != haystack.end();
}

}  // namespace

std::vector<RecordedSession> record_sessions(World& world, RandomSource& src, std::size_t n) {
  const auto config = SimConfig::defaults();
  std::vector<RecordedSession> out;
  for (std::size_t i = 0; i < n; ++i) {
    Transcript t;
    SimChannel ch(config, t);
    auto keys = world.handshake(src, ch);
    out.push_back({std::move(t.events), keys});
  }
  return out;
}

// ---- replay -----------------------------------------------------------------

AttackOutcome attack_replay(World& target, const std::vector<TranscriptEvent>& recorded, RandomSource& src) {
  AttackOutcome out{AttackKind::Replay, target.scheme, false, {}};
  std::vector<std::string> rejected;
  bool accepted = false;
  switch (target.scheme) {
    case Scheme::Mht: {
      auto& gw = *target.mht_gateway;
      const auto m1 = mht::M1::decode(message_of(recorded, "M1"));
      const auto m3 = mht::M3::decode(message_of(recorded, "M3"));
      accepted |= completes([&] {
        gw.challenge(m1, src);
        gw.finalize(m1.uid, m3);
      }, rejected);
      gw.state(m1.uid).pending.reset();
      accepted |= completes([&] { gw.finalize(m1.uid, m3); }, rejected);
      break;
    }
    case Scheme::Dors: {
      auto& gw = *target.dors_gateway;
      const auto sig = dors::Signature::decode(message_of(recorded, "SIGNATURE"), gw.pub.params);
      accepted |= completes([&] {
        dors::challenge(gw, src);
        dors::accept(gw, sig);
      }, rejected);
      accepted |= completes([&] { dors::accept(gw, sig); }, rejected);
      break;
    }
    case Scheme::Dhs: {
      auto& edge = *target.edge;
      const auto login = dhs::Ipv6Packet::decode(message_of(recorded, "LOGIN"));
      const auto response = dhs::Ipv6Packet::decode(message_of(recorded, "AGREE"));
      accepted |= completes([&] {
        edge.verify(login, src);
        edge.agree(response);
      }, rejected);
      accepted |= completes([&] { edge.agree(response); }, rejected);
      break;
    }
  }
  out.succeeded = accepted;
  out.detail = accepted ? "gateway completed a replayed run" : "rejected: " + summarize(rejected);
  return out;
}

AttackOutcome attack_replay(Scheme scheme, std::uint64_t seed) {
  auto src = RandomSource::seeded(seed);
  World world = World::create(scheme, src);
  world.handshake(src);
  World before = world;
  const auto sessions = record_sessions(world, src, 1);
  auto now = attack_replay(world, sessions[0].events, src);
  auto rolled_back = attack_replay(before, sessions[0].events, src);
  AttackOutcome out{AttackKind::Replay, scheme, now.succeeded || rolled_back.succeeded, {}};
  out.detail = "current state " + now.detail + "; rolled-back state " + rolled_back.detail;
  return out;
}

// ---- impersonation ----------------------------------------------------------

std::optional<dors::Signature> forge_from_observed(const dors::PublicKey& pk, const dors::ChainState& chain,
                                                   ByteView message, std::span<const dors::Signature> observed) {
  const auto idx = dors::subset(message, chain, pk.params);
  std::map<std::uint16_t, std::map<std::uint16_t, dors::Reveal>> known;
  for (const auto& sig : observed) {
    for (std::size_t i = 0; i < sig.indices.size() && i < sig.reveals.size(); ++i)
      known[sig.tree_index][sig.indices[i]] = sig.reveals[i];
  }
  for (const auto& [tree, leaves] : known) {
    dors::Signature forged;
    forged.tree_index = tree;
    bool covered = true;
    for (auto i : idx) {
      auto it = leaves.find(static_cast<std::uint16_t>(i));
      if (it == leaves.end()) {
        covered = false;
        break;
      }
      forged.indices.push_back(static_cast<std::uint16_t>(i));
      forged.reveals.push_back(it->second);
    }
    if (covered) return forged;
  }
  return std::nullopt;
}

ForgeryExperiment dors_forgery_experiment(const dors::Params& params, std::size_t trials, std::uint64_t seed) {
  auto src = RandomSource::seeded(seed);
  auto kp = dors::keygen(random_key(src), params);
  const auto first = dors::message_for(random_nonce(src), "alice");
  const auto signed_first = dors::sign(kp.secret, kp.chain, first);
  const auto chain = dors::verify(kp.pub, kp.chain, first, signed_first.signature);
  if (!chain) throw std::logic_error("honest signature rejected");
  const std::vector<dors::Signature> observed{signed_first.signature};

  ForgeryExperiment ex;
  ex.params = params;
  ex.trials = trials;
  ex.revealed = std::set<std::uint16_t>(observed[0].indices.begin(), observed[0].indices.end()).size();
  for (std::size_t i = 0; i < trials; ++i) {
    const auto msg = dors::message_for(random_nonce(src), "alice");
    const auto forged = forge_from_observed(kp.pub, *chain, msg, observed);
    if (forged && dors::verify_material(kp.pub, *chain, msg, *forged)) ++ex.successes;
  }
  ex.rate = trials ? static_cast<double>(ex.successes) / static_cast<double>(trials) : 0.0;
  ex.bound = std::pow(static_cast<double>(params.k) / static_cast<double>(params.t), params.k);
  ex.sigma = trials ? std::sqrt(ex.bound * (1 - ex.bound) / static_cast<double>(trials)) : 0.0;
  return ex;
}

namespace {

/// Keys an attacker without secrets might try: hashes of public values.
std::vector<Key256> guessed_keys(const World& w, const std::vector<RecordedSession>& sessions) {
  std::vector<Key256> keys{Key256{}, key_from_digest(hash(w.uid))};
  for (const auto& s : sessions) {
    for (const auto& e : s.events) keys.push_back(key_from_digest(hash(e.message)));
  }
  return keys;
}

AttackOutcome impersonate_mht(World& w, const std::vector<RecordedSession>& sessions, RandomSource& src) {
  std::vector<std::string> rejected;
  bool accepted = false;
  auto& gw = *w.mht_gateway;
  const auto keys = guessed_keys(w, sessions);

  // Posing as the user. The counter is the number of completed sessions seen.
  std::vector<Digest256> tags{random_digest(src)};
  for (const auto& s : sessions) tags.push_back(mht::M3::decode(message_of(s.events, "M3")).tag_u);
  const auto counter = gw.state(w.uid).txn_counter;
  for (std::size_t i = 0; i < tags.size() + keys.size(); ++i) {
    accepted |= completes([&] {
      const mht::M1 m1{w.uid, random_nonce(src), counter};
      const auto m2 = gw.challenge(m1, src);
      Digest256 tag = i < tags.size() ? tags[i]
                                      : mac(keys[i - tags.size()],
                                            concat({m2.n_g.view(), m1.n_u.view(), m2.root.view(), as_bytes("u")}));
      gw.finalize(w.uid, mht::M3{tag});
    }, rejected);
  }

  // Posing as the gateway. The history is public: rebuild it from the
  // transcripts so that only the tag is missing.
  // Sessions before the recording are not visible; then use the user's tree.
  std::vector<Digest256> leaves{mht::genesis_leaf(w.uid)};
  merkle::MerkleTree history = w.mht_user->tree;
  if (sessions.size() == counter) {
    for (const auto& s : sessions) {
      leaves.push_back(mht::transaction_leaf(mht::M1::decode(message_of(s.events, "M1")).n_u,
                                             mht::M2::decode(message_of(s.events, "M2")).n_g));
    }
    history = merkle::MerkleTree(leaves);
  }
  for (const auto& key : keys) {
    accepted |= completes([&] {
      auto& user = *w.mht_user;
      const auto m1 = mht::initiate(user, src);
      mht::M2 m2;
      m2.n_g = random_nonce(src);
      m2.root = history.root();
      m2.proof = history.prove(history.size() - 1);
      m2.tag = mac(key, concat({m1.n_u.view(), m2.n_g.view(), m2.root.view()}));
      try {
        mht::respond(user, m2);
      } catch (...) {
        mht::abandon(user);
        throw;
      }
    }, rejected);
  }
  const bool history_public = history.root() == w.mht_user->tree.root();
  return {AttackKind::Impersonate, Scheme::Mht, accepted,
          std::string(history_public ? "history rebuilt from transcripts; " : "") + "rejected: " + summarize(rejected)};
}

AttackOutcome impersonate_dors(World& w, const std::vector<RecordedSession>& sessions, bool knows_pk,
                               RandomSource& src) {
  std::vector<std::string> rejected;
  bool accepted = false;
  auto& gw = *w.dors_gateway;
  std::vector<dors::Signature> observed;
  for (const auto& s : sessions) observed.push_back(dors::Signature::decode(message_of(s.events, "SIGNATURE"), gw.pub.params));
  std::size_t forged_count = 0;

  // Posing as the user against fresh challenges.
  if (knows_pk) {
    auto chain = dors::genesis_chain(gw.pub);
    for (const auto& sig : observed) chain = dors::advance(chain, sig);
    for (int attempt = 0; attempt < 32; ++attempt) {
      accepted |= completes([&] {
        const auto c = dors::challenge(gw, src);
        const auto msg = dors::message_for(c.nonce, w.uid);
        auto sig = forge_from_observed(gw.pub, chain, msg, observed);
        if (sig) {
          ++forged_count;
        } else if (attempt % 2 == 0 && !observed.empty()) {
          sig = observed.back();
        } else {
          dors::Signature guess;
          guess.tree_index = static_cast<std::uint16_t>(chain.active_tree);
          for (auto i : dors::subset(msg, chain, gw.pub.params)) {
            guess.indices.push_back(static_cast<std::uint16_t>(i));
            guess.reveals.push_back(random_digest(src));
          }
          sig = guess;
        }
        dors::accept(gw, *sig);
      }, rejected);
    }
  }

  // Posing as the gateway: challenges need the link key.
  for (int attempt = 0; attempt < 4; ++attempt) {
    accepted |= completes([&] {
      auto& user = *w.dors_user;
      dors::ChallengeMessage c{random_nonce(src), user.chain.value, random_digest(src)};
      if (attempt == 1 && !sessions.empty())
        c = dors::ChallengeMessage::decode(message_of(sessions.back().events, "CHALLENGE"));
      dors::respond(user, c);
      dors::confirm(user, random_digest(src));
    }, rejected);
  }
  return {AttackKind::Impersonate, Scheme::Dors, accepted,
          "subset covered by observed reveals " + std::to_string(forged_count) + "/32; rejected: " +
              summarize(rejected)};
}

AttackOutcome impersonate_dhs(World& w, const std::vector<RecordedSession>& sessions, RandomSource& src) {
  std::vector<std::string> rejected;
  bool accepted = false;
  auto& edge = *w.edge;
  auto& card = *w.card;
  const auto keys = guessed_keys(w, sessions);

  // Posing as the card. The current identifier is visible in the address of
  // the card's next login, so the adversary is given it.
  const auto iid_now = card.current_iid;
  std::vector<dhs::Ipv6Packet> attempts;
  for (const auto& s : sessions) {
    const auto old = dhs::Ipv6Packet::decode(message_of(s.events, "LOGIN"));
    attempts.push_back(old);
    attempts.push_back(dhs::encapsulate(old.payload, iid_now, old.prefix));
  }
  for (const auto& key : keys) {
    const auto n_u = random_nonce(src);
    WireWriter w8;
    w8.u64(card.prefix).u64(iid_now.value);
    const dhs::LoginPayload forged{n_u, mac(key, concat({w8.bytes(), n_u.view()}))};
    attempts.push_back(dhs::encapsulate(forged.encode(), iid_now, card.prefix));
  }
  for (const auto& packet : attempts) {
    accepted |= completes([&] {
      edge.verify(packet, src);
      const auto old = dhs::Ipv6Packet::decode(message_of(sessions.back().events, "AGREE"));
      edge.agree(dhs::encapsulate(old.payload, packet.iid, packet.prefix));
    }, rejected);
  }

  // Posing as the edge toward the card.
  std::vector<Digest256> confirms{random_digest(src)};
  for (const auto& s : sessions) confirms.push_back(dhs::EdgeConfirm::decode(message_of(s.events, "CONFIRM")).tag);
  for (const auto& tag : confirms) {
    accepted |= completes([&] {
      dhs::login(card, card.uid, w.password, src);
      dhs::agree(card, dhs::Challenge{random_nonce(src)});
      dhs::complete(card, dhs::EdgeConfirm{tag});
    }, rejected);
  }
  return {AttackKind::Impersonate, Scheme::Dhs, accepted, "rejected: " + summarize(rejected)};
}

}  // namespace

AttackOutcome attack_impersonate(const AdversaryModel& adversary, Scheme scheme, std::uint64_t seed,
                                 const dors::Params& params) {
  auto src = RandomSource::seeded(seed);
  World world = World::create(scheme, src, params);
  auto sessions = record_sessions(world, src, 3);
  if (!adversary.has(Capability::Inject))
    return {AttackKind::Impersonate, scheme, false, "adversary cannot inject messages"};
  if (!adversary.has(Capability::RecordReplay)) sessions.clear();
  switch (scheme) {
    case Scheme::Mht: return impersonate_mht(world, sessions, src);
    case Scheme::Dors: return impersonate_dors(world, sessions, adversary.has(Capability::KnowsPublicKeys), src);
    case Scheme::Dhs:
      if (sessions.empty()) return {AttackKind::Impersonate, scheme, false, "nothing recorded to build packets from"};
      return impersonate_dhs(world, sessions, src);
  }
  return {};
}

// ---- session key disclosure -------------------------------------------------

namespace {

const std::vector<std::string>& protocol_labels() {
  static const std::vector<std::string> labels{"sk",      "mht-ratchet", "mht-user",  "dors-sk", "dors-ratchet",
                                               "dors-link", "dhs-sk",    "dhs-ratchet", "iid-mask", "proof",
                                               "card",    "edge",        "leaf",      "home"};
  return labels;
}

}  // namespace

AttackOutcome attack_session_key_disclosure(Scheme scheme, std::size_t sessions, std::size_t disclosed,
                                            std::uint64_t seed) {
  AttackOutcome out{AttackKind::SessionKeyDisclosure, scheme, false, {}};
  if (sessions < 2) {
    out.detail = "fewer than two sessions; nothing else to expose";
    return out;
  }
  if (disclosed >= sessions) throw Error(Errc::ConfigError, "disclosed session out of range");
  auto src = RandomSource::seeded(seed);
  World world = World::create(scheme, src);
  const auto recorded = record_sessions(world, src, sessions);
  for (const auto& s : recorded) {
    if (!(s.keys.client == s.keys.server)) {
      out.succeeded = true;
      out.detail = "honest run produced unequal keys";
      return out;
    }
  }
  const Key256 leaked = recorded[disclosed].keys.server;

  std::vector<Bytes> salts{Bytes{}};
  for (const auto& v : view_sessions(world, recorded)) salts.push_back(v.sk_salt);
  for (const auto& s : recorded) {
    for (const auto& e : s.events) {
      salts.push_back(e.message);
      for (std::size_t width : {16u, 32u}) {
        for (std::size_t off = 0; off + width <= e.message.size(); ++off)
          salts.emplace_back(e.message.begin() + off, e.message.begin() + off + width);
      }
    }
  }
  std::set<Key256> derived{leaked};
  for (const auto& label : protocol_labels()) {
    for (const auto& salt : salts) derived.insert(kdf(leaked, label, salt));
  }
  std::size_t exposed = 0;
  for (std::size_t j = 0; j < recorded.size(); ++j) {
    if (j != disclosed && derived.contains(recorded[j].keys.server)) ++exposed;
  }
  out.succeeded = exposed > 0;
  out.detail = std::to_string(derived.size()) + " keys derived from session " + std::to_string(disclosed + 1) +
               "; other sessions exposed: " + std::to_string(exposed) + "/" + std::to_string(sessions - 1);
  return out;
}

// ---- stolen device ----------------------------------------------------------

AttackOutcome attack_stolen_device(Scheme scheme, std::size_t sessions, bool capture_pending, std::uint64_t seed) {
  AttackOutcome out{AttackKind::StolenDevice, scheme, false, {}};
  auto src = RandomSource::seeded(seed);
  World world = World::create(scheme, src);
  const auto recorded = record_sessions(world, src, sessions);
  const auto views = view_sessions(world, recorded);

  std::vector<Nonce128> nonces;
  for (const auto& v : views) nonces.insert(nonces.end(), v.nonces.begin(), v.nonces.end());
  // Nonces of the interrupted run sit in pending state until it ends; a
  // capture in that window counts as a success.
  std::vector<Nonce128> pending_nonces;
  if (capture_pending) {
    // Capture in the middle of one more run, after the user has answered.
    switch (scheme) {
      case Scheme::Mht: {
        const auto m1 = mht::initiate(*world.mht_user, src);
        const auto m2 = world.mht_gateway->challenge(m1, src);
        mht::respond(*world.mht_user, m2);
        pending_nonces = {m1.n_u, m2.n_g};
        break;
      }
      case Scheme::Dors: {
        const auto c = dors::challenge(*world.dors_gateway, src);
        dors::respond(*world.dors_user, c);
        pending_nonces = {c.nonce};
        break;
      }
      case Scheme::Dhs: {
        const auto login = dhs::login(*world.card, world.uid, world.password, src);
        const auto c = world.edge->verify(login, src);
        dhs::agree(*world.card, c);
        pending_nonces = {dhs::LoginPayload::decode(login.payload).n_u, c.n_e};
        break;
      }
    }
  }

  const Bytes captured = concat({world.user_state(), world.gateway_state()});
  std::size_t leaked_nonces = 0;
  for (const auto& n : nonces) leaked_nonces += contains_bytes(captured, n.view());
  std::size_t pending_held = 0;
  for (const auto& n : pending_nonces) pending_held += contains_bytes(captured, n.view());
  std::size_t leaked_keys = 0;
  for (const auto& s : recorded) leaked_keys += contains_bytes(captured, s.keys.server.view());

  std::size_t recovered = 0;
  std::vector<bool> found(recorded.size(), false);
  for (std::size_t off = 0; off + 32 <= captured.size(); ++off) {
    const auto candidate = Key256::from_span(ByteView(captured).subspan(off, 32));
    for (std::size_t i = 0; i < recorded.size(); ++i) {
      if (!found[i] && kdf(candidate, views[i].sk_label, views[i].sk_salt) == recorded[i].keys.server) {
        found[i] = true;
        ++recovered;
      }
    }
  }

  // With the edge database alone, try to log in as the card.
  bool fresh_login = false;
  std::vector<std::string> rejected;
  if (scheme == Scheme::Dhs) {
    const auto& entry = world.edge->entry(world.uid);
    auto fake_home = dhs::initialize(src);
    auto fake = dhs::register_user(fake_home, world.uid, "attacker", src).card;
    fake.current_iid = entry.current_iid;
    fake.link_key = entry.edge_share;
    world.edge->entry(world.uid).pending.reset();
    fresh_login = completes([&] {
      const auto challenge = world.edge->verify(dhs::login(fake, world.uid, "attacker", src), src);
      world.edge->agree(dhs::agree(fake, challenge));
    }, rejected);
  }

  out.succeeded = leaked_nonces > 0 || pending_held > 0 || leaked_keys > 0 || recovered > 0 || fresh_login;
  std::ostringstream d;
  d << "captured " << captured.size() << " bytes; nonces found " << leaked_nonces << "/" << nonces.size()
    << "; session keys found " << leaked_keys << "; keys derived " << recovered << "/" << recorded.size();
  if (capture_pending) d << "; in-flight nonces held " << pending_held << "/" << pending_nonces.size();
  if (scheme == Scheme::Dhs) d << "; fresh login from edge db " << (fresh_login ? "accepted" : "rejected: " + summarize(rejected));
  out.detail = d.str();
  return out;
}

AttackOutcome run_attack(AttackKind kind, Scheme scheme, std::uint64_t seed) {
  switch (kind) {
    case AttackKind::Replay: return attack_replay(scheme, seed);
    case AttackKind::Impersonate: return attack_impersonate(AdversaryModel::network(), scheme, seed);
    case AttackKind::SessionKeyDisclosure: return attack_session_key_disclosure(scheme, 3, 1, seed);
    case AttackKind::StolenDevice: return attack_stolen_device(scheme, 3, false, seed);
  }
  return {};
}

std::vector<AttackOutcome> attack_matrix(std::uint64_t seed) {
  std::vector<AttackOutcome> out;
  for (auto kind : kAllAttacks) {
    for (auto scheme : kAllSchemes) out.push_back(run_attack(kind, scheme, seed));
  }
  return out;
}

}  // namespace hearth::harness
