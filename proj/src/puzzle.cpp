// SPDX-License-Identifier: Apache-2.0
#include <algorithm>

#include "preact/envs.hpp"
#include "preact/text.hpp"

namespace preact {

namespace {

// Every keyword must prefix some word of the question ("drop" hits "dropped").
bool signature_hits(const std::vector<std::string>& words, const std::vector<std::string>& signature) {
  return std::all_of(signature.begin(), signature.end(), [&](const std::string& kw) {
    return std::any_of(words.begin(), words.end(),
                       [&](const std::string& w) { return w.rfind(kw, 0) == 0; });
  });
}

bool fact_hits(const std::vector<std::string>& words, const PuzzleFact& fact) {
  return std::any_of(fact.signatures.begin(), fact.signatures.end(),
                     [&](const auto& sig) { return signature_hits(words, sig); });
}

}  // namespace

PuzzleEnv::PuzzleEnv(const TaskSpec& spec)
    : Environment(spec), world_(std::get<PuzzleWorld>(spec.world)) {}

std::size_t PuzzleEnv::guessed() const {
  return static_cast<std::size_t>(std::count(confirmed_.begin(), confirmed_.end(), true));
}

double PuzzleEnv::score() const {
  if (confirmed_.empty()) return 0.0;
  return static_cast<double>(guessed()) / static_cast<double>(confirmed_.size());
}

std::string PuzzleEnv::do_reset(std::uint64_t) {
  confirmed_.assign(world_.key_facts.size(), false);
  return world_.story;
}

EnvOutcome PuzzleEnv::do_step(std::string_view question) {
  const auto words = text::words(question);

  for (std::size_t i = 0; i < world_.key_facts.size(); ++i) {
    if (confirmed_[i] || !fact_hits(words, world_.key_facts[i])) continue;
    confirmed_[i] = true;
    if (guessed() == confirmed_.size()) {
      std::string obs = "Yes";
      if (!world_.truth.empty()) obs += "\nYou have guessed the truth: " + world_.truth;
      return {obs, true, 1.0};
    }
    return {"Yes", false, 0.0};
  }
  for (std::size_t i = 0; i < world_.key_facts.size(); ++i)
    if (confirmed_[i] && fact_hits(words, world_.key_facts[i])) return {"Redundant", false, 0.0};
  for (const auto& f : world_.false_facts)
    if (fact_hits(words, f)) return {"No", false, 0.0};
  return {"Irrelevant", false, 0.0};
}

}  // namespace preact
