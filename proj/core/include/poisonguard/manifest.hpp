#pragma once

#include <filesystem>

#include "poisonguard/corpus.hpp"

namespace poisonguard {

// Corpus interchange format.
//
// Text variant (any extension except .pgb):
//   header line  `poisonguard-corpus v1 dim=512 runs=<R>`
//   per account  `account_id<TAB>owner_id<TAB>label[<TAB>slot=provenance,...]`
//                followed by 10*R lines `slot<TAB>run<TAB>` + 512 floats.
//   The optional fourth field lists slots whose provenance differs from the
//   owner; it is written only for victim accounts and may be absent in
//   externally produced manifests (provenance then defaults to the owner).
//
// Binary variant (.pgb): same logical schema, little-endian 32-bit floats,
// length-prefixed strings.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

Corpus load_manifest(const std::filesystem::path& path);

}  // namespace poisonguard
