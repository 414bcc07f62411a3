#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "hearth/gateway.hpp"

// Random operation sequences against the gateway, checked against a small
// reference model of account states and issued sessions.
namespace hearth::testing {

struct LifecycleReport {
  std::size_t sequences = 0;
  std::size_t operations = 0;
  std::size_t logins_granted = 0;
  std::size_t accesses_checked = 0;
  std::size_t violations = 0;
  std::string first_violation;
};

inline gateway::UserProfile fuzz_profile(const std::string& uid, gateway::Role role, bool dors, bool card) {
  gateway::UserProfile p;
  p.uid = uid;
  p.name = uid;
  p.age = 30;
  p.role = role;
  p.dors_capable = dors;
  p.card_capable = card;
  return p;
}

inline LifecycleReport run_lifecycle_fuzz(std::size_t sequences, std::uint64_t seed, std::size_t ops_per_sequence = 12) {
  using gateway::Status;
  LifecycleReport rep;
  const std::array<std::string, 4> uids{"u0", "u1", "u2", "u3"};
  const std::array<std::string, 4> devices{"front-lock", "thermostat", "camera", "garage"};

  for (std::size_t seq = 0; seq < sequences; ++seq) {
    auto src = RandomSource::seeded(seed * 1'000'003 + seq);
    auto pick = [&](std::uint32_t n) { return static_cast<std::uint32_t>(src.draw<std::uint32_t>() % n); };
    auto gw = gateway::Gateway::first_boot(src, gateway::default_policies(), dors::Params{64, 8, 2, 2});
    gateway::ClientDevice owner_dev = gw.bootstrap_owner(fuzz_profile("owner", gateway::Role::Owner, false, false), "pw", {}, src);
    (void)owner_dev;

    std::map<std::string, Status> model;
    std::map<std::string, gateway::ClientDevice> devices_of;
    std::set<std::uint64_t> issued;
    // Cards that saw a wrong password may refuse or lock.
    std::set<std::string> tainted;
    ++rep.sequences;

    auto violation = [&](const std::string& what) {
      if (rep.violations++ == 0) rep.first_violation = "sequence " + std::to_string(seq) + ": " + what;
    };
    auto expect_code = [&](Errc want, auto&& f, const std::string& what) {
      try {
        f();
        violation(what + " did not throw " + std::string(to_string(want)));
      } catch (const Error& e) {
        if (e.code() != want) violation(what + " threw " + e.what());
      }
    };

    for (std::size_t op = 0; op < ops_per_sequence; ++op) {
      ++rep.operations;
      const auto& uid = uids[pick(uids.size())];
      const bool known = model.contains(uid);
      switch (pick(4)) {
        case 0: {
          auto profile = fuzz_profile(uid, pick(2) ? gateway::Role::Resident : gateway::Role::Guest, pick(2), pick(2));
          if (known) {
            expect_code(Errc::AlreadyRegistered, [&] { gw.register_user(profile, "pw-" + uid, {}, src); }, "re-register");
          } else {
            devices_of[uid] = gw.register_user(profile, "pw-" + uid, {}, src);
            model[uid] = Status::Pending;
          }
          break;
        }
        case 1: {
          const bool activate = pick(3) != 0;
          auto& dev = devices_of[uid];
          if (!known) {
            expect_code(Errc::UnknownUser, [&] { gw.owner_verify("owner", uid, activate, dev, src); }, "verify unknown");
          } else if (model[uid] != Status::Pending) {
            expect_code(Errc::InvalidTransition, [&] { gw.owner_verify("owner", uid, activate, dev, src); }, "re-verify");
          } else {
            if (pick(8) == 0) {
              expect_code(Errc::Forbidden, [&] { gw.owner_verify(uid, uid, activate, dev, src); }, "self-verify");
            }
            model[uid] = gw.owner_verify("owner", uid, activate, dev, src);
            if (model[uid] != (activate ? Status::Active : Status::Rejected)) violation("verify result");
          }
          break;
        }
        case 2: {
          context::ContextSnapshot s;
          s.origin = pick(4) == 0 ? context::Origin::Internet : context::Origin::Local;
          s.bluetooth_present = s.origin == context::Origin::Local && pick(2);
          s.ip_class = s.origin == context::Origin::Local ? context::IpClass::HomeSubnet : context::IpClass::KnownExternal;
          const std::string pw = pick(5) == 0 ? "wrong" : "pw-" + uid;
          auto& dev = devices_of[uid];
          if (pw == "wrong") tainted.insert(uid);
          if (!known) {
            expect_code(Errc::UnknownUser, [&] { gw.login(uid, pw, s, dev, src); }, "login unknown");
          } else if (model[uid] != Status::Active) {
            expect_code(Errc::NotVerified, [&] { gw.login(uid, pw, s, dev, src); }, "login before verification");
          } else {
            try {
              auto res = gw.login(uid, pw, s, dev, src);
              if (res.session) {
                ++rep.logins_granted;
                if (res.decision != context::Decision::Grant) violation("session without grant");
                if (!issued.insert(res.session->id).second) violation("session id reused");
              } else if (res.decision == context::Decision::Grant) {
                violation("grant without session");
              }
            } catch (const Error& e) {
              if (e.code() != Errc::AuthFailed || !tainted.contains(uid))
                violation(std::string("active login threw ") + e.what());
            }
          }
          break;
        }
        default: {
          ++rep.accesses_checked;
          const bool use_issued = !issued.empty() && pick(3) != 0;
          std::uint64_t id = 0;
          if (use_issued) {
            auto it = issued.begin();
            std::advance(it, pick(static_cast<std::uint32_t>(issued.size())));
            id = *it;
          } else {
            do id = src.draw<std::uint64_t>() % 64; while (issued.contains(id));
          }
          context::ContextSnapshot s;
          s.bluetooth_present = true;
          const auto& device = devices[pick(devices.size())];
          if (!use_issued) {
            expect_code(Errc::UnknownSession, [&] { gw.authorize_device_access(id, device, s); }, "access before login");
          } else {
            try {
              gw.authorize_device_access(id, device, s);
            } catch (const Error& e) {
              if (e.code() != Errc::UnknownDevice) violation(std::string("issued session threw ") + e.what());
            }
          }
          break;
        }
      }
    }
  }
  return rep;
}

}  // namespace hearth::testing
