# Tests for the metric estimands toolkit
