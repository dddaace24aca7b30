// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0
//
// Built-in word lists. The files under data/ carry the same content and can
// be edited and passed on the command line instead.

#ifndef CERTFAIR_LEXICONS_HPP_
#define CERTFAIR_LEXICONS_HPP_

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace certfair {

using WordPair = std::pair<std::string, std::string>;

// Definitional binary gender pairs (he/she, him/her, ...). data/gender_pairs.tsv
const std::vector<WordPair>& default_gender_pairs();

// Gender-specific words left untouched by neutralization. data/gendered_words.txt
const std::vector<std::string>& default_gendered_words();

// Identity terms used for instance weighting. data/identity_terms.txt
const std::vector<std::string>& default_identity_terms();

// Gender tokens counted in explanation reports. data/gender_tokens.txt
const std::vector<std::string>& default_gender_tokens();

// axis -> group -> tokens used by the synthetic corpus generator.
const std::map<std::string, std::map<std::string, std::vector<std::string>>>&
default_identity_inventory();

}  // namespace certfair

#endif  // CERTFAIR_LEXICONS_HPP_
