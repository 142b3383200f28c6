# Test suite for the blimp control stack
