"""BPMN models as ontologies: conversion, reference verification, S-BPM translation and execution."""

__version__ = "0.1.0"
