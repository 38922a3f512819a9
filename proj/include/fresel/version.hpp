#pragma once

#define FRESEL_VERSION "0.1.0"
