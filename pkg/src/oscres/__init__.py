"""Reservoir computing with networks of differentiating-neuron ring oscillators."""
