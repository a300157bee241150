#pragma once

#include <string>

#include "medrl/data/episode.hpp"

namespace medrl {

/// Episode JSONL: a `{"meta": {"D": int, "feature_names": [...]}}` header
/// line followed by one episode object per line. Missing observation
/// entries and unlabeled rewards are JSON nulls. save/load roundtrips are
/// lossless and byte-deterministic.
EpisodeSet load_episodes(const std::string& path);
void save_episodes(const EpisodeSet& set, const std::string& path);

}  // namespace medrl
