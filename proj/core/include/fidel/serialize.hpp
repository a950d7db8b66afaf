#ifndef FIDEL_SERIALIZE_HPP_
#define FIDEL_SERIALIZE_HPP_

#include <string>

#include "fidel/fed.hpp"
#include "fidel/model.hpp"

namespace fidel {

// Self-describing binary container: magic "FIDM", version byte, layer-spec
// table, then little-endian float64 parameter blobs in layer order. Model
// updates use the same layout under magic "FIDU" plus round metadata.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

void save_update(const ModelUpdate& update, const Model& reference, const std::string& path);
ModelUpdate load_update(const std::string& path);

}  // namespace fidel

#endif  // FIDEL_SERIALIZE_HPP_
