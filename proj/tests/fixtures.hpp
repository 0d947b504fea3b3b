#pragma once
// Small hand-built vocabularies shared by the unit tests.

#include <string>

#include "symhrl/logic.hpp"

namespace fixtures {

using namespace symhrl::logic;

// Room-world predicates over `rooms` room constants and the given colours.
inline Vocabulary room_vocab(int rooms = 3, std::initializer_list<const char*> colours = {"red"}) {
  Vocabulary v;
  v.add_predicate("ReachRoom", 1, PredicateKind::Subgoal);
  v.add_predicate("Connect", 2, PredicateKind::Property);
  v.add_predicate("Lock", 3, PredicateKind::Property);
  v.add_predicate("RoomHasKeyColor", 2, PredicateKind::Property);
  v.add_predicate("visited", 1, PredicateKind::Event);
  v.add_predicate("hasKeyColor", 1, PredicateKind::Event);
  v.add_predicate("CurAct", 2, PredicateKind::Auxiliary);
  for (int r = 1; r <= rooms; ++r) v.add_constant(std::to_string(r));
  for (const char* c : colours) v.add_constant(c);
  return v;
}

inline Vocabulary nav_vocab(int circles = 4) {
  Vocabulary v;
  v.add_predicate("AchieveObj", 1, PredicateKind::Subgoal);
  v.add_predicate("Connect", 2, PredicateKind::Property);
  for (const char* c : {"isRed", "isYellow", "isGrey", "isBlack"}) v.add_predicate(c, 1, PredicateKind::Property);
  for (const char* c : {"visitedRed", "visitedYellow", "visitedGrey", "visitedBlack"})
    v.add_predicate(c, 0, PredicateKind::Event);
  v.add_predicate("CurAct", 2, PredicateKind::Auxiliary);
  v.add_constant("origin");
  for (int i = 1; i <= circles; ++i) v.add_constant("c" + std::to_string(i));
  return v;
}

// p/1, q/1, r/1, s/2 over the given number of constants a, b, c, ...
inline Vocabulary tiny_vocab(int constants = 2) {
  Vocabulary v;
  v.add_predicate("p", 1, PredicateKind::Property);
  v.add_predicate("q", 1, PredicateKind::Subgoal);
  v.add_predicate("r", 1, PredicateKind::Property);
  v.add_predicate("s", 2, PredicateKind::Property);
  for (int i = 0; i < constants; ++i) v.add_constant(std::string(1, static_cast<char>('a' + i)));
  return v;
}

inline GroundAtom ga(const Vocabulary& v, const std::string& text) { return parse_ground_atom(text, v); }

inline SymbolicState state(const Vocabulary& v, std::initializer_list<const char*> atoms) {
  std::vector<GroundAtom> out;
  for (const char* a : atoms) out.push_back(ga(v, a));
  return SymbolicState(std::move(out));
}

}  // namespace fixtures
