// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0

#include "certfair/lexicons.hpp"

namespace certfair {

const std::vector<WordPair>& default_gender_pairs() {
  static const std::vector<WordPair> pairs = {
      {"he", "she"},           {"him", "her"},         {"his", "hers"},
      {"himself", "herself"},  {"man", "woman"},       {"men", "women"},
      {"boy", "girl"},         {"boys", "girls"},      {"guy", "gal"},
      {"gentleman", "lady"},   {"father", "mother"},   {"son", "daughter"},
      {"brother", "sister"},   {"husband", "wife"},    {"boyfriend", "girlfriend"},
      {"uncle", "aunt"},       {"king", "queen"},      {"male", "female"},
      {"mr", "mrs"},           {"waiter", "waitress"}, {"actor", "actress"},
  };
  return pairs;
}

const std::vector<std::string>& default_gendered_words() {
  static const std::vector<std::string> words = {
      "he",      "she",      "him",       "her",        "his",     "hers",
      "himself", "herself",  "man",       "woman",      "men",     "women",
      "boy",     "girl",     "boys",      "girls",      "guy",     "gal",
      "gentleman", "lady",   "ladies",    "father",     "mother",  "son",
      "daughter", "brother", "sister",    "husband",    "wife",    "boyfriend",
      "girlfriend", "uncle", "aunt",      "king",       "queen",   "male",
      "female",  "mr",       "mrs",       "waiter",     "waitress", "actor",
      "actress",
  };
  return words;
}

const std::vector<std::string>& default_identity_terms() {
  static const std::vector<std::string> words = {
      "he",          "him",       "man",        "guy",      "she",
      "her",         "woman",     "lady",       "transgender", "trans",
      "nonbinary",   "enby",      "heterosexual", "straight", "gay",
      "homosexual",  "lesbian",   "lesbians",   "bisexual", "bi",
  };
  return words;
}

const std::vector<std::string>& default_gender_tokens() {
  static const std::vector<std::string> words = {
      "he",        "she",      "him",      "her",        "his",       "hers",
      "himself",   "herself",  "man",      "woman",      "men",       "women",
      "guy",       "guys",     "lady",     "ladies",     "boy",       "girl",
      "boys",      "girls",    "male",     "female",     "father",    "mother",
      "husband",   "wife",     "son",      "daughter",   "brother",   "sister",
      "transgender", "trans",  "nonbinary", "enby",
  };
  return words;
}

const std::map<std::string, std::map<std::string, std::vector<std::string>>>&
default_identity_inventory() {
  static const std::map<std::string, std::map<std::string, std::vector<std::string>>>
      inventory = {
          {"gender",
           {{"male", {"he", "him", "man", "guy"}},
            {"female", {"she", "her", "woman", "lady"}},
            {"transgender", {"transgender", "trans"}},
            {"non-binary", {"nonbinary", "enby"}}}},
          {"orientation",
           {{"heterosexual", {"heterosexual", "straight"}},
            {"gay", {"gay", "homosexual"}},
            {"lesbian", {"lesbian", "lesbians"}},
            {"bisexual", {"bisexual", "bi"}}}},
      };
  return inventory;
}

}  // namespace certfair
