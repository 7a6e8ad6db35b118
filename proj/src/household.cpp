// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <regex>

#include "preact/envs.hpp"
#include "preact/hash.hpp"
#include "preact/text.hpp"

namespace preact {

namespace {

std::string object_type(std::string_view object) {
  auto s = std::string(text::trim(object));
  auto space = s.find_last_of(' ');
  if (space != std::string::npos &&
      std::all_of(s.begin() + static_cast<long>(space) + 1, s.end(), [](char c) { return std::isdigit(c); }))
    s.resize(space);
  return s;
}

// "a x", "a x, and a y", "a x, a y, and a z"
std::string list_items(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    if (i + 1 == items.size() && items.size() > 1) out += "and ";
    out += "a " + items[i];
  }
  return out;
}

bool accessible(const Receptacle& r) { return !r.openable || r.open; }

// Lower-case, single spaces, no trailing period.
std::string canonical(std::string_view action) {
  auto s = text::normalize_ws(action);
  while (!s.empty() && (s.back() == '.' || s.back() == '!')) s.pop_back();
  return std::string(text::trim(s));
}

}  // namespace

HouseholdEnv::HouseholdEnv(const TaskSpec& spec)
    : Environment(spec), world_(std::get<HouseholdWorld>(spec.world)) {}

Receptacle* HouseholdEnv::find(std::string_view name) {
  for (auto& r : state_)
    if (text::iequals(r.name, name)) return &r;
  return nullptr;
}

const Receptacle* HouseholdEnv::here() const {
  for (const auto& r : state_)
    if (r.name == location_) return &r;
  return nullptr;
}

std::string HouseholdEnv::describe_contents(const Receptacle& r) const {
  if (r.openable && !r.open) return "The " + r.name + " is closed.";
  auto items = r.contents.empty() ? std::string("nothing") : list_items(r.contents);
  if (r.openable) return "The " + r.name + " is open. In it, you see " + items + ".";
  return "On the " + r.name + ", you see " + items + ".";
}

std::string HouseholdEnv::do_reset(std::uint64_t seed) {
  state_ = world_.receptacles;
  location_.clear();
  holding_.reset();
  solved_ = false;

  // Listing order is a seeded Fisher-Yates permutation.
  std::vector<std::string> names;
  for (const auto& r : state_) names.push_back(r.name);
  std::uint64_t x = seed;
  for (std::size_t i = names.size(); i > 1; --i) {
    x = splitmix64(x);
    std::swap(names[i - 1], names[x % i]);
  }
  return "You are in the middle of a room. Looking quickly around you, you see " + list_items(names) +
         ".\nYour task is to: " + world_.goal_text + ".";
}

EnvOutcome HouseholdEnv::do_step(std::string_view raw) {
  static const std::regex go_to(R"(^go to (.+)$)");
  static const std::regex open_re(R"(^open (.+)$)");
  static const std::regex close_re(R"(^close (.+)$)");
  static const std::regex take_re(R"(^take (.+) from (.+)$)");
  static const std::regex put_re(R"(^put (.+) (?:in/on|in|on) (.+)$)");
  static const std::regex examine_re(R"(^examine (.+)$)");

  const auto action = canonical(raw);
  const EnvOutcome nothing{std::string(kNothingHappened), false, 0.0};
  std::smatch m;

  if (std::regex_match(action, m, go_to)) {
    auto* r = find(m[1].str());
    if (!r) return nothing;
    location_ = r->name;
    return {"You arrive at " + r->name + ". " + describe_contents(*r), false, 0.0};
  }
  if (std::regex_match(action, m, open_re)) {
    auto* r = find(m[1].str());
    if (!r || r->name != location_ || !r->openable || r->open) return nothing;
    r->open = true;
    if (r->contents.empty()) return {"You open the " + r->name + ". The " + r->name + " is empty.", false, 0.0};
    return {"You open the " + r->name + ". In it, you see " + list_items(r->contents) + ".", false, 0.0};
  }
  if (std::regex_match(action, m, close_re)) {
    auto* r = find(m[1].str());
    if (!r || r->name != location_ || !r->openable || !r->open) return nothing;
    r->open = false;
    return {"You close the " + r->name + ".", false, 0.0};
  }
  if (std::regex_match(action, m, take_re)) {
    auto* r = find(m[2].str());
    if (!r || r->name != location_ || !accessible(*r) || holding_) return nothing;
    auto obj = m[1].str();
    auto it = std::find_if(r->contents.begin(), r->contents.end(),
                           [&](const std::string& o) { return text::iequals(o, obj); });
    if (it == r->contents.end()) return nothing;
    holding_ = *it;
    r->contents.erase(it);
    return {"You pick up the " + *holding_ + " from the " + r->name + ".", false, 0.0};
  }
  if (std::regex_match(action, m, put_re)) {
    auto* r = find(m[2].str());
    if (!r || r->name != location_ || !accessible(*r) || !holding_ ||
        !text::iequals(*holding_, m[1].str()))
      return nothing;
    auto obj = *holding_;
    holding_.reset();
    r->contents.push_back(obj);
    std::string obs = "You put the " + obj + " in/on the " + r->name + ".";
    if (text::iequals(r->name, world_.goal_target) &&
        text::iequals(object_type(obj), world_.goal_object_type)) {
      solved_ = true;
      return {obs, true, 1.0};
    }
    return {obs, false, 0.0};
  }
  if (std::regex_match(action, m, examine_re)) {
    auto* r = find(m[1].str());
    if (!r || r->name != location_) return nothing;
    return {describe_contents(*r), false, 0.0};
  }
  if (action == "inventory") {
    if (!holding_) return {"You are not carrying anything.", false, 0.0};
    return {"You are carrying: a " + *holding_ + ".", false, 0.0};
  }
  return nothing;
}

std::vector<std::string> HouseholdEnv::admissible_actions() const {
  std::vector<std::string> out;
  for (const auto& r : state_)
    if (r.name != location_) out.push_back("go to " + r.name);
  if (const auto* r = here()) {
    if (r->openable) out.push_back((r->open ? "close " : "open ") + r->name);
    out.push_back("examine " + r->name);
    if (accessible(*r)) {
      if (!holding_)
        for (const auto& o : r->contents) out.push_back("take " + o + " from " + r->name);
      if (holding_) out.push_back("put " + *holding_ + " in/on " + r->name);
    }
  }
  out.push_back("inventory");
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace preact
