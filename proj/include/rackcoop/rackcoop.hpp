#pragma once

#include "rackcoop/error.hpp"
#include "rackcoop/field.hpp"
#include "rackcoop/linalg.hpp"
#include "rackcoop/params.hpp"
#include "rackcoop/tradeoff.hpp"
#include "rackcoop/ifg.hpp"
#include "rackcoop/codec.hpp"
#include "rackcoop/harness.hpp"
