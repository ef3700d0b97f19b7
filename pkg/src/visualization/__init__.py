# This file makes 'visualization' a package.