"""Test suite initialization."""